#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "finn/network.hpp"

namespace finn::testing {

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

inline Eigen::VectorXd uniform_point(std::mt19937_64& rng, int dim, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd x(dim);
  for (int i = 0; i < dim; ++i) x[i] = u(rng);
  return x;
}

// Monotone network with n inputs, 1..max_depth hidden layers of width
// 1..max_width, drawn from rng.
inline Network random_monotone(std::mt19937_64& rng, int n, int max_depth = 3, int max_width = 16) {
  std::uniform_int_distribution<int> depth(1, max_depth);
  std::uniform_int_distribution<int> width(1, max_width);
  std::vector<int> hidden(static_cast<std::size_t>(depth(rng)));
  for (int& w : hidden) w = width(rng);
  return net_init(Architecture::monotone(n, hidden), rng());
}

inline Network random_plain(std::mt19937_64& rng, int n, int max_depth = 3, int max_width = 16) {
  std::uniform_int_distribution<int> depth(1, max_depth);
  std::uniform_int_distribution<int> width(1, max_width);
  std::vector<int> hidden(static_cast<std::size_t>(depth(rng)));
  for (int& w : hidden) w = width(rng);
  return net_init(Architecture::plain(n, hidden), rng());
}

}  // namespace finn::testing
