#include "finn/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "finn/errors.hpp"

namespace finn::oracles {

namespace {

double checked(double v) {
  if (!std::isfinite(v)) throw NumericalError("oracle: non-finite integrand sample");
  return v;
}

double simpson_rec(const ScalarFunction& fn, double a, double b, double fa, double fm,
                   double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = checked(fn(lm));
  const double frm = checked(fn(rm));
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(fn, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(fn, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Integrates over dims [d, n) with the leading coordinates fixed in `x`.
double nested_simpson(const PointFunction& fn, const Box& box, Eigen::VectorXd& x, int d,
                      double tol) {
  const int n = box.dim();
  if (d == n) return checked(fn(x));
  const double inner_tol = tol / std::max(1.0, box.upper[d] - box.lower[d]);
  ScalarFunction slice = [&](double t) {
    x[d] = t;
    return nested_simpson(fn, box, x, d + 1, inner_tol);
  };
  return simpson(slice, box.lower[d], box.upper[d], tol);
}

// Radical inverse in base `b`.
double radical_inverse(std::uint64_t i, unsigned b) {
  double inv = 1.0 / b;
  double f = inv;
  double r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % b);
    i /= b;
    f *= inv;
  }
  return r;
}

constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

QuadResult monte_carlo(const PointFunction& fn, const Box& box, double tol) {
  const int n = box.dim();
  if (n > static_cast<int>(std::size(kPrimes)))
    throw std::invalid_argument("quad_integral: dimension above Halton prime table");
  constexpr int kShifts = 16;
  // Points per shift grow until the standard error meets tol or the cap hits.
  std::mt19937_64 rng(0x5eedULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::VectorXd> shifts;
  for (int r = 0; r < kShifts; ++r) {
    Eigen::VectorXd s(n);
    for (int i = 0; i < n; ++i) s[i] = unit(rng);
    shifts.push_back(s);
  }
  const double volume = box.volume();
  QuadResult result;
  result.monte_carlo = true;
  for (std::uint64_t per_shift = 1024; per_shift <= (1u << 16); per_shift *= 4) {
    std::vector<double> means(kShifts, 0.0);
    Eigen::VectorXd x(n);
    for (int r = 0; r < kShifts; ++r) {
      double acc = 0.0;
      for (std::uint64_t k = 1; k <= per_shift; ++k) {
        for (int i = 0; i < n; ++i) {
          double u = radical_inverse(k, kPrimes[i]) + shifts[static_cast<std::size_t>(r)][i];
          u -= std::floor(u);
          x[i] = box.lower[i] + u * (box.upper[i] - box.lower[i]);
        }
        acc += checked(fn(x));
      }
      means[static_cast<std::size_t>(r)] = volume * acc / static_cast<double>(per_shift);
    }
    double mean = 0.0;
    for (double m : means) mean += m;
    mean /= kShifts;
    double var = 0.0;
    for (double m : means) var += (m - mean) * (m - mean);
    var /= (kShifts - 1);
    result.estimate = mean;
    result.std_error = std::sqrt(var / kShifts);
    if (result.std_error <= tol) break;
  }
  return result;
}

}  // namespace

double simpson(const ScalarFunction& fn, double a, double b, double tol, int max_depth) {
  // Four initial panels so narrow features are not skipped by the first
  // error estimate.
  constexpr int kPanels = 4;
  const double width = (b - a) / kPanels;
  double total = 0.0;
  for (int p = 0; p < kPanels; ++p) {
    const double lo = a + p * width;
    const double hi = p + 1 == kPanels ? b : lo + width;
    const double flo = checked(fn(lo));
    const double fmid = checked(fn(0.5 * (lo + hi)));
    const double fhi = checked(fn(hi));
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    total += simpson_rec(fn, lo, hi, flo, fmid, fhi, whole, tol / kPanels, max_depth);
  }
  return total;
}

QuadResult quad_integral(const PointFunction& fn, const Box& box, double tol) {
  box.validate();
  if (!(tol > 0.0)) throw std::invalid_argument("quad_integral: tol must be positive");
  if (box.dim() >= 4) return monte_carlo(fn, box, tol);
  Eigen::VectorXd x = box.lower;
  return {nested_simpson(fn, box, x, 0, tol), 0.0, false};
}

double fd_mixed_partial(const PointFunction& fn, const Eigen::VectorXd& x, Mask s, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_mixed_partial: h must be positive");
  std::vector<int> dims;
  for (int i = 0; i < static_cast<int>(x.size()); ++i)
    if (s & (Mask{1} << i)) dims.push_back(i);
  const int k = static_cast<int>(dims.size());
  double acc = 0.0;
  Eigen::VectorXd p(x.size());
  for (unsigned signs = 0; signs < (1u << k); ++signs) {
    p = x;
    int negatives = 0;
    for (int j = 0; j < k; ++j) {
      const bool plus = signs & (1u << j);
      p[dims[static_cast<std::size_t>(j)]] += plus ? h : -h;
      negatives += plus ? 0 : 1;
    }
    const double v = fn(p);
    acc += (negatives & 1) ? -v : v;
  }
  return acc / std::pow(2.0 * h, k);
}

double fd_mixed_partial_richardson(const PointFunction& fn, const Eigen::VectorXd& x, Mask s,
                                   double h) {
  return (4.0 * fd_mixed_partial(fn, x, s, 0.5 * h) - fd_mixed_partial(fn, x, s, h)) / 3.0;
}

double ks_statistic(std::span<const double> samples, const ScalarFunction& cdf) {
  if (samples.size() < 100) throw std::invalid_argument("ks_statistic: need at least 100 samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double c = std::clamp(cdf(sorted[i]), 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / m - c, c - static_cast<double>(i) / m});
  }
  return d;
}

double fd_derivative(const ScalarFunction& fn, double x, double h) {
  return (fn(x + h) - fn(x - h)) / (2.0 * h);
}

}  // namespace finn::oracles
