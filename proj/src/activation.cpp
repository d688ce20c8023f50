#include "finn/activation.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

#include <boost/rational.hpp>

namespace finn {

namespace {

using Rational = boost::rational<std::int64_t>;
using RationalPoly = std::vector<Rational>;

constexpr double kInvSqrtPi = 0.56418958354775628694807945156077;
constexpr double kSaturation = 38.0;

// (x * a + b / 2) / k
RationalPoly recur(const RationalPoly& a, const RationalPoly& b, int k) {
  RationalPoly out(std::max(a.size() + 1, b.size()), Rational(0));
  for (std::size_t i = 0; i < a.size(); ++i) out[i + 1] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i] / Rational(2);
  for (Rational& c : out) c /= Rational(k);
  while (!out.empty() && out.back() == Rational(0)) out.pop_back();
  return out;
}

std::vector<double> to_double(const RationalPoly& p) {
  std::vector<double> out;
  out.reserve(p.size());
  for (const Rational& c : p)
    out.push_back(static_cast<double>(c.numerator()) / static_cast<double>(c.denominator()));
  return out;
}

double horner(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
  return acc;
}

long double horner(const std::vector<double>& c, long double x) {
  long double acc = 0.0L;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + static_cast<long double>(c[i]);
  return acc;
}

// Phi(x) and g(x). For x < 0 the two terms of I_k cancel (the loss grows
// like |x|^{2k} / k!), so that branch is carried in extended precision.
struct ErfPair {
  long double phi;
  long double g;
};

ErfPair erf_pair(double x) {
  if (x > kSaturation) return {1.0L, 0.0L};
  if (x < -kSaturation) return {0.0L, 0.0L};
  if (x < 0.0) {
    const long double lx = x;
    return {0.5L * std::erfc(-lx), static_cast<long double>(kInvSqrtPi) * std::exp(-lx * lx)};
  }
  return {0.5 * std::erfc(-x), kInvSqrtPi * std::exp(-x * x)};
}

double combine(const std::vector<double>& p, const std::vector<double>& q, double x, const ErfPair& e) {
  if (x < 0.0) {
    long double v = 0.0L;
    if (!p.empty() && e.phi != 0.0L) v += horner(p, static_cast<long double>(x)) * e.phi;
    if (!q.empty() && e.g != 0.0L) v += horner(q, static_cast<long double>(x)) * e.g;
    return static_cast<double>(v);
  }
  double v = 0.0;
  if (!p.empty() && e.phi != 0.0L) v += horner(p, x) * static_cast<double>(e.phi);
  if (!q.empty() && e.g != 0.0L) v += horner(q, x) * static_cast<double>(e.g);
  return v;
}

// Below this the closed form cancels badly even in long double; the ratios
// r_k = I_k / I_{k-1} are taken from the backward recurrence
// r_{k-1} = 1 / (2k r_k - 2x), which is stable for x < 0.
constexpr double kTailStart = -2.0;
constexpr int kTailExtraTerms = 60;

// out[j] = I_{j-1}(x) for j = 0..top+1.
void left_tail(double x, int top, std::span<long double> out) {
  const long double lx = x;
  long double r = 0.0L;
  std::vector<long double> ratios(static_cast<std::size_t>(top) + 1);
  for (int k = top + kTailExtraTerms; k >= 1; --k) {
    r = 1.0L / (2.0L * k * r - 2.0L * lx);
    if (k - 1 <= top) ratios[static_cast<std::size_t>(k - 1)] = r;
  }
  out[0] = static_cast<long double>(kInvSqrtPi) * std::exp(-lx * lx);
  for (int k = 0; k <= top; ++k)
    out[static_cast<std::size_t>(k) + 1] = out[static_cast<std::size_t>(k)] * ratios[static_cast<std::size_t>(k)];
}

bool use_tail(double x) { return x < kTailStart && x >= -kSaturation; }

// P_k(t) with tanh^{(k)}(x) = P_k(tanh x), via P_{k+1} = P_k'(t) (1 - t^2).
const std::vector<std::vector<double>>& tanh_polys() {
  static const std::vector<std::vector<double>> table = [] {
    std::vector<std::vector<double>> polys{{0.0, 1.0}};
    for (int k = 0; k < 10; ++k) {
      const auto& p = polys.back();
      std::vector<double> dp(p.size() > 1 ? p.size() - 1 : 1, 0.0);
      for (std::size_t i = 1; i < p.size(); ++i) dp[i - 1] = static_cast<double>(i) * p[i];
      std::vector<double> next(dp.size() + 2, 0.0);
      for (std::size_t i = 0; i < dp.size(); ++i) {
        next[i] += dp[i];
        next[i + 2] -= dp[i];
      }
      polys.push_back(std::move(next));
    }
    return polys;
  }();
  return table;
}

}  // namespace

IterErfTable::IterErfTable(int max_k) : max_k_(max_k) {
  if (max_k < 0 || max_k > kMaxSupportedOrder)
    throw std::invalid_argument("IterErfTable: max_k out of supported range");
  // Index k - kMinOrder.
  std::vector<RationalPoly> p{{}, {}, {Rational(1)}};
  std::vector<RationalPoly> q{{Rational(0), Rational(-2)}, {Rational(1)}, {}};
  for (int k = 1; k <= max_k; ++k) {
    const std::size_t i = static_cast<std::size_t>(k - kMinOrder);
    p.push_back(recur(p[i - 1], p[i - 2], k));
    q.push_back(recur(q[i - 1], q[i - 2], k));
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    p_.push_back(to_double(p[i]));
    q_.push_back(to_double(q[i]));
  }
}

void IterErfTable::check_order(int k) const {
  if (k < kMinOrder || k > max_k_)
    throw std::out_of_range("IterErfTable: order out of range");
}

const std::vector<double>& IterErfTable::p(int k) const {
  check_order(k);
  return p_[static_cast<std::size_t>(k - kMinOrder)];
}

const std::vector<double>& IterErfTable::q(int k) const {
  check_order(k);
  return q_[static_cast<std::size_t>(k - kMinOrder)];
}

double IterErfTable::eval(int k, double x) const {
  check_order(k);
  const std::size_t i = static_cast<std::size_t>(k - kMinOrder);
  if (k >= 0 && use_tail(x)) {
    std::vector<long double> ladder(static_cast<std::size_t>(k) + 2);
    left_tail(x, k, ladder);
    return static_cast<double>(ladder.back());
  }
  return combine(p_[i], q_[i], x, erf_pair(x));
}

std::vector<double> IterErfTable::sigma_derivs(int n, double x, int max_order) const {
  if (n < 1 || max_order < 0 || max_order > n)
    throw std::out_of_range("sigma_derivs: derivative order out of range");
  check_order(n - 1);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(max_order) + 1);
  for (int j = 0; j <= max_order; ++j) out.push_back(eval(n - 1 - j, x));
  return out;
}

IterErfTable build_table(int max_k) { return IterErfTable(max_k); }

const IterErfTable& shared_erf_table() {
  static const IterErfTable table(8);
  return table;
}

double activation_derivative(Activation act, int order_n, int k, double x) {
  switch (act) {
    case Activation::identity:
      return k == 0 ? x : (k == 1 ? 1.0 : 0.0);
    case Activation::sigma_n:
      return shared_erf_table().eval(order_n - 1 - k, x);
    case Activation::tanh: {
      const auto& polys = tanh_polys();
      if (k < 0 || static_cast<std::size_t>(k) >= polys.size())
        throw std::out_of_range("tanh derivative order out of range");
      return horner(polys[static_cast<std::size_t>(k)], std::tanh(x));
    }
  }
  throw std::invalid_argument("unknown activation");
}

void activation_derivatives(Activation act, int order_n, double x, std::span<double> out) {
  switch (act) {
    case Activation::identity:
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = k == 0 ? x : (k == 1 ? 1.0 : 0.0);
      return;
    case Activation::sigma_n: {
      const IterErfTable& table = shared_erf_table();
      const ErfPair e = erf_pair(x);
      std::vector<long double> ladder;
      if (use_tail(x) && order_n >= 1) {
        ladder.resize(static_cast<std::size_t>(order_n) + 1);
        left_tail(x, order_n - 1, ladder);
      }
      for (std::size_t k = 0; k < out.size(); ++k) {
        const int order = order_n - 1 - static_cast<int>(k);
        if (!ladder.empty() && order >= -1) {
          table.p(order);  // range check
          out[k] = static_cast<double>(ladder[static_cast<std::size_t>(order + 1)]);
        } else {
          out[k] = combine(table.p(order), table.q(order), x, e);
        }
      }
      return;
    }
    case Activation::tanh: {
      const auto& polys = tanh_polys();
      if (out.size() > polys.size()) throw std::out_of_range("tanh derivative order out of range");
      const double t = std::tanh(x);
      for (std::size_t k = 0; k < out.size(); ++k) out[k] = horner(polys[k], t);
      return;
    }
  }
}

void activation_derivatives(Activation act, int order_n, const Var& x, std::span<Var> out) {
  std::vector<double> plain(out.size() + 1);
  activation_derivatives(act, order_n, x.value, std::span<double>(plain));
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (x.is_constant())
      out[k] = Var(plain[k]);
    else
      out[k] = x.tape->record(plain[k], x, plain[k + 1]);
  }
}

}  // namespace finn
