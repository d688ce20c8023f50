#include "finn/box.hpp"

#include <stdexcept>

namespace finn {

Box::Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
  validate();
}

Box Box::cube(int dim, double lo, double hi) {
  return Box(Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi));
}

Eigen::VectorXd Box::vertex(Mask m) const {
  Eigen::VectorXd p = lower;
  for (int i = 0; i < dim(); ++i)
    if (m & (Mask{1} << i)) p[i] = upper[i];
  return p;
}

bool Box::contains(const Eigen::VectorXd& x) const {
  if (x.size() != lower.size()) return false;
  return ((x.array() >= lower.array()) && (x.array() <= upper.array())).all();
}

void Box::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw std::invalid_argument("box: bounds must share a positive dimension");
  if (!(lower.array() < upper.array()).all())
    throw std::invalid_argument("box: lower bound must be strictly below upper bound");
}

}  // namespace finn
