#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include <Eigen/Core>

#include "finn/box.hpp"

// Independent numerical references used to check the analytic paths. Nothing
// here depends on the MultiDual or activation code; integrands are plain
// point functions.
namespace finn::oracles {

using PointFunction = std::function<double(const Eigen::VectorXd&)>;
using ScalarFunction = std::function<double(double)>;

struct QuadResult {
  double estimate = 0.0;
  // Zero on the Simpson path; standard error across randomised shifts on the
  // Monte Carlo path.
  double std_error = 0.0;
  bool monte_carlo = false;
};

inline constexpr int kSimpsonMaxDepth = 12;

// Tensorised adaptive Simpson for dim <= 3, randomly shifted Halton Monte
// Carlo for dim >= 4. Throws NumericalError on a non-finite integrand sample.
QuadResult quad_integral(const PointFunction& fn, const Box& box, double tol);

// One-dimensional adaptive Simpson over [a, b].
double simpson(const ScalarFunction& fn, double a, double b, double tol,
               int max_depth = kSimpsonMaxDepth);

// Nested central differences over the dims in `s` (bit i is dim i + 1):
// sum over sign vectors of prod(signs) fn(x + h * signs) / (2h)^|s|.
double fd_mixed_partial(const PointFunction& fn, const Eigen::VectorXd& x, Mask s, double h);

// Richardson combination (4 D(h/2) - D(h)) / 3 of fd_mixed_partial, which
// cancels the O(h^2) term.
double fd_mixed_partial_richardson(const PointFunction& fn, const Eigen::VectorXd& x, Mask s,
                                   double h);

// sup |empirical CDF - cdf|. Requires at least 100 samples.
double ks_statistic(std::span<const double> samples, const ScalarFunction& cdf);

// Central difference of a scalar function.
double fd_derivative(const ScalarFunction& fn, double x, double h);

}  // namespace finn::oracles
