#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

#include "finn/box.hpp"
#include "finn/errors.hpp"
#include "finn/network.hpp"

namespace finn {

// Inclusion-exclusion over 2^n vertices is capped at n = 20.
inline constexpr int kMaxBoxIntegralDim = 20;
// Equality constraints refuse raw integrals below this magnitude.
inline constexpr double kDegenerateNormaliser = 1e-9;

enum class ConstraintKind { none, equality, inequality };

std::string to_string(ConstraintKind kind);
ConstraintKind constraint_kind_from_string(const std::string& name);

struct Constraint {
  ConstraintKind kind = ConstraintKind::none;
  double epsilon = 0.0;
  Box domain;
};

// F = s * F', where F' is the network and s the rescaling that makes the
// integral over the constraint domain equal (or stay below) epsilon.
struct ConstrainedModel {
  Network net;
  Constraint constraint;

  void validate() const;
};

// sum over vertices p of (-1)^{#(p_i = a_i)} F(p), ascending bitmask order.
template <class T, class Fn>
T vertex_sum(const Box& box, Fn&& F) {
  if (box.dim() > kMaxBoxIntegralDim) throw std::invalid_argument("box dimension above vertex cap");
  const int n = box.dim();
  T acc = T(0.0);
  for (Mask m = 0; m < (Mask{1} << n); ++m) {
    const bool negative = ((n - popcount(m)) & 1) != 0;
    const T value = F(box.vertex(m));
    acc = negative ? acc - value : acc + value;
  }
  return acc;
}

template <class T>
T box_integral(const Architecture& arch, const BoundLayers<T>& bound, const Box& box) {
  if (box.dim() != arch.input_dim) throw std::invalid_argument("box dimension mismatch");
  return vertex_sum<T>(box, [&](const Eigen::VectorXd& p) { return evaluate<T>(arch, bound, p, 0); });
}

double box_integral(const Network& net, const Box& box);

// Scale factor from the raw integral of F' over the domain. Equality:
// epsilon / raw. Inequality: epsilon / max(raw, epsilon). None: 1.
template <class T>
T scale_from_integral(const Constraint& c, const T& raw) {
  switch (c.kind) {
    case ConstraintKind::none:
      return T(1.0);
    case ConstraintKind::equality:
      if (!(std::abs(value_of(raw)) >= kDegenerateNormaliser))
        throw NumericalError("degenerate normaliser: raw integral over the constraint domain is ~0");
      return T(c.epsilon) / raw;
    case ConstraintKind::inequality:
      if (value_of(raw) > c.epsilon) return T(c.epsilon) / raw;
      return T(1.0);
  }
  throw std::invalid_argument("unknown constraint kind");
}

template <class T>
T scale_factor(const ConstrainedModel& model, const BoundLayers<T>& bound) {
  if (model.constraint.kind == ConstraintKind::none) return T(1.0);
  const T raw = box_integral<T>(model.net.architecture(), bound, model.constraint.domain);
  return scale_from_integral<T>(model.constraint, raw);
}

double scale_factor(const ConstrainedModel& model);

double eval_f(const ConstrainedModel& model, const Eigen::VectorXd& x);
double eval_F(const ConstrainedModel& model, const Eigen::VectorXd& x);

// Gradient of eval_f with respect to the raw parameters, including the path
// through the scale factor.
ValueAndGradient eval_f_grads(const ConstrainedModel& model, const Eigen::VectorXd& x);

// Integral of the scaled f over the constraint domain.
double constrained_integral(const ConstrainedModel& model);
// |integral - epsilon| for equality, max(0, integral - epsilon) for
// inequality, 0 without a constraint.
double constraint_residual(const ConstrainedModel& model);

// Evaluator with bound parameters and the scale factor computed once; a
// snapshot, so later parameter updates to the model are not seen.
class ModelEvaluator {
 public:
  explicit ModelEvaluator(const ConstrainedModel& model);

  double scale() const { return scale_; }
  double f(const Eigen::VectorXd& x) const;
  double F(const Eigen::VectorXd& x) const;
  double partial(const Eigen::VectorXd& x, Mask s) const;
  // Integral of the scaled f over an arbitrary box.
  double integral(const Box& box) const;

 private:
  Architecture arch_;
  BoundLayers<double> bound_;
  double scale_;
};

}  // namespace finn
