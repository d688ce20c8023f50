#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "finn/activation.hpp"
#include "finn/oracles.hpp"

using namespace finn;

namespace {

const double kInvSqrtPi = 1.0 / std::sqrt(std::numbers::pi);

std::vector<double> derivative(const std::vector<double>& p) {
  std::vector<double> d;
  for (std::size_t i = 1; i < p.size(); ++i) d.push_back(static_cast<double>(i) * p[i]);
  return d;
}

double coeff(const std::vector<double>& p, std::size_t i) { return i < p.size() ? p[i] : 0.0; }

double rel_err_of(double got, double want) {
  return want == 0.0 ? std::abs(got) : std::abs(got - want) / std::abs(want);
}

using Wide = boost::multiprecision::cpp_bin_float_100;

// Closed form p_k Phi + q_k g with the coefficients rebuilt from the
// recurrence at 100 digits, enough to absorb the cancellation on the left.
double wide_eval(int k, double x) {
  using Poly = std::vector<Wide>;
  auto step = [](const Poly& a, const Poly& b, int n) {
    Poly out(std::max(a.size() + 1, b.size()), Wide(0));
    for (std::size_t i = 0; i < a.size(); ++i) out[i + 1] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i] / 2;
    for (Wide& c : out) c /= n;
    return out;
  };
  Poly p_prev{}, p{Wide(1)}, q_prev{Wide(1)}, q{};
  if (k == -1) std::swap(p, p_prev), std::swap(q, q_prev);
  for (int n = 1; n <= k; ++n) {
    Poly pn = step(p, p_prev, n), qn = step(q, q_prev, n);
    p_prev = std::move(p), p = std::move(pn);
    q_prev = std::move(q), q = std::move(qn);
  }
  const Wide wx = x;
  const Wide phi = boost::math::erfc(-wx) / 2;
  const Wide g = exp(-wx * wx) / sqrt(boost::math::constants::pi<Wide>());
  auto horner = [&](const Poly& c) {
    Wide acc = 0;
    for (std::size_t i = c.size(); i-- > 0;) acc = acc * wx + c[i];
    return acc;
  };
  return static_cast<double>(horner(p) * phi + horner(q) * g);
}

}  // namespace

TEST_CASE("table base cases and first orders") {
  const IterErfTable t0 = build_table(0);
  CHECK(t0.p(0) == std::vector<double>{1.0});
  CHECK(t0.q(0).empty());
  CHECK(t0.p(-1).empty());
  CHECK(t0.q(-1) == std::vector<double>{1.0});

  const IterErfTable t1 = build_table(1);
  CHECK(t1.p(1) == std::vector<double>{0.0, 1.0});
  CHECK(t1.q(1) == std::vector<double>{0.5});

  const IterErfTable t2 = build_table(2);
  CHECK(t2.p(2) == std::vector<double>{0.25, 0.0, 0.5});
  CHECK(t2.q(2) == std::vector<double>{0.0, 0.25});

  CHECK_THROWS_AS(build_table(-1), std::invalid_argument);
}

// I_k' = p_k' Phi + (p_k + q_k' - 2x q_k) g, so I_k' = I_{k-1} holds exactly
// when p_k' = p_{k-1} and p_k + q_k' - 2x q_k = q_{k-1}.
TEST_CASE("polynomial identities behind the derivative chain") {
  const IterErfTable t = build_table(IterErfTable::kMaxSupportedOrder);
  for (int k = 0; k <= t.max_k(); ++k) {
    const auto dp = derivative(t.p(k));
    const auto dq = derivative(t.q(k));
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK(coeff(dp, i) == doctest::Approx(coeff(t.p(k - 1), i)).epsilon(1e-13));
      const double lhs = coeff(t.p(k), i) + coeff(dq, i) - 2.0 * (i > 0 ? coeff(t.q(k), i - 1) : 0.0);
      CHECK(lhs == doctest::Approx(coeff(t.q(k - 1), i)).epsilon(1e-13).scale(1e-12));
    }
  }
}

TEST_CASE("act_eval reference values") {
  const IterErfTable& t = shared_erf_table();
  CHECK(act_eval(t, 0, 0.0) == 0.5);
  CHECK(act_eval(t, -1, 0.0) == doctest::Approx(kInvSqrtPi).epsilon(1e-15));
  CHECK(std::abs(act_eval(t, 1, 0.0) - 0.5 * kInvSqrtPi) < 1e-12);
  CHECK(act_eval(t, 2, 0.0) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(act_eval(t, 0, 1.3) == doctest::Approx(0.5 * (std::erf(1.3) + 1.0)).epsilon(1e-14));
  CHECK_THROWS_AS(act_eval(t, 9, 0.0), std::out_of_range);
  CHECK_THROWS_AS(act_eval(t, -3, 0.0), std::out_of_range);
}

TEST_CASE("I_1(0) from quadrature of Phi") {
  const double q = oracles::simpson([](double s) { return 0.5 * std::erfc(-s); }, -30.0, 0.0, 1e-13);
  CHECK(std::abs(q - 0.5 * kInvSqrtPi) < 1e-10);
}

TEST_CASE("act_derivs lists the sigma_n derivative ladder") {
  const IterErfTable& t = shared_erf_table();
  SUBCASE("n = 1 is the erf sigmoid") {
    const auto d = act_derivs(t, 1, 0.7, 1);
    CHECK(d[0] == doctest::Approx(0.5 * (std::erf(0.7) + 1.0)).epsilon(1e-14));
    CHECK(d[1] == doctest::Approx(kInvSqrtPi * std::exp(-0.49)).epsilon(1e-14));
  }
  SUBCASE("n = 2 is softplus-like with derivative I_0") {
    const auto d = act_derivs(t, 2, -0.4, 1);
    CHECK(d[0] == doctest::Approx(act_eval(t, 1, -0.4)));
    CHECK(d[1] == doctest::Approx(act_eval(t, 0, -0.4)));
    // Softplus shape: ~x for large x, ~0 for very negative x.
    CHECK(act_derivs(t, 2, 6.0, 0)[0] == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(act_derivs(t, 2, -6.0, 0)[0] < 1e-15);
  }
  SUBCASE("n = 3 at zero") {
    // p_2(0) = 1/4 multiplies Phi(0) = 1/2.
    const auto d = act_derivs(t, 3, 0.0, 3);
    CHECK(d[0] == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(d[1] == doctest::Approx(0.5 * kInvSqrtPi).epsilon(1e-15));
    CHECK(d[2] == 0.5);
    CHECK(d[3] == doctest::Approx(kInvSqrtPi).epsilon(1e-15));
    // I_2(0) cross-checked by integrating I_1 from far left.
    const double q = oracles::simpson([&](double s) { return act_eval(t, 1, s); }, -30.0, 0.0, 1e-13);
    CHECK(std::abs(q - 0.125) < 1e-10);
  }
  SUBCASE("order range") {
    CHECK_THROWS_AS(act_derivs(t, 2, 0.0, 3), std::out_of_range);
    CHECK_THROWS_AS(act_derivs(t, 0, 0.0, 0), std::out_of_range);
  }
}

TEST_CASE("evaluation matches a 100-digit closed form") {
  const IterErfTable& t = shared_erf_table();
  for (int k = -1; k <= t.max_k(); ++k) {
    double worst = 0.0;
    for (double x = -25.0; x <= 8.0; x += 0.173) worst = std::max(worst, rel_err_of(act_eval(t, k, x), wide_eval(k, x)));
    CHECK_MESSAGE(worst < 1e-12, "k = ", k);
  }
  // The derivative ladder takes the same paths.
  for (double x : {-30.0, -7.5, -2.0001, -1.9999, 0.0, 3.0}) {
    std::vector<double> d(10);
    activation_derivatives(Activation::sigma_n, 9, x, std::span<double>(d));
    for (int j = 0; j < 10; ++j) CHECK(rel_err_of(d[j], wide_eval(8 - j, x)) < 1e-12);
  }
}

TEST_CASE("derivative chain by finite differences on [-6, 6]") {
  const IterErfTable& t = shared_erf_table();
  for (int k = 1; k <= t.max_k(); ++k) {
    double worst = 0.0;
    for (double x = -6.0; x <= 6.0; x += 0.05) {
      const double fd = oracles::fd_derivative([&](double s) { return act_eval(t, k, s); }, x, 1e-4);
      const double want = act_eval(t, k - 1, x);
      worst = std::max(worst, std::abs(fd - want) / want);
    }
    CHECK_MESSAGE(worst < 1e-6, "k = ", k);
  }
}

TEST_CASE("quadrature of I_{k-1} reproduces I_k") {
  const IterErfTable& t = shared_erf_table();
  for (int k = 0; k <= 5; ++k) {
    for (double x : {-3.0, -0.5, 0.0, 1.2, 4.0}) {
      const double q = oracles::simpson([&](double s) { return act_eval(t, k - 1, s); }, -8.0, x, 1e-10);
      CHECK(std::abs(q - (act_eval(t, k, x) - act_eval(t, k, -8.0))) < 1e-6);
    }
  }
}

TEST_CASE("strict positivity and left asymptotics") {
  const IterErfTable& t = shared_erf_table();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  double lowest = 1.0;
  for (int i = 0; i < 100000; ++i) {
    const double x = u(rng);
    for (int k = -1; k <= t.max_k(); ++k) lowest = std::min(lowest, act_eval(t, k, x));
  }
  CHECK(lowest > 0.0);
  for (int k = 0; k <= t.max_k(); ++k) CHECK(act_eval(t, k, -10.0) < 1e-12);
}

TEST_CASE("saturation beyond the clamp") {
  const IterErfTable& t = shared_erf_table();
  CHECK(act_eval(t, 0, 40.0) == 1.0);
  CHECK(act_eval(t, 1, 40.0) == 40.0);
  CHECK(act_eval(t, 3, -40.0) == 0.0);
  CHECK(std::isfinite(act_eval(t, 8, 1e6)));
}

TEST_CASE("tanh derivatives") {
  for (double x : {-1.5, 0.0, 0.3, 2.0}) {
    const double t = std::tanh(x);
    CHECK(activation_derivative(Activation::tanh, 0, 0, x) == doctest::Approx(t));
    CHECK(activation_derivative(Activation::tanh, 0, 1, x) == doctest::Approx(1 - t * t));
    CHECK(activation_derivative(Activation::tanh, 0, 2, x) == doctest::Approx(-2 * t * (1 - t * t)));
    for (int k = 1; k <= 5; ++k) {
      const double fd = oracles::fd_derivative(
          [&](double s) { return activation_derivative(Activation::tanh, 0, k - 1, s); }, x, 1e-5);
      CHECK(activation_derivative(Activation::tanh, 0, k, x) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }
}
