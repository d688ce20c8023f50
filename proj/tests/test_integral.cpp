#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "finn/integral.hpp"
#include "finn/oracles.hpp"
#include "test_util.hpp"

using namespace finn;
using finn::testing::random_monotone;
using finn::testing::random_plain;
using finn::testing::rel_err;
using finn::testing::uniform_point;

namespace {

// F(x) = |w| x + b on one input; integrates to |w| over [0, 1].
Network linear(double w, double b = 0.0) {
  Architecture arch;
  arch.input_dim = 1;
  arch.positive = true;
  arch.layers.push_back({1, 1, LayerKind::monotone_affine});
  Eigen::VectorXd p(2);
  p << w, b;
  return Network(arch, p);
}

Box unit(int n) { return Box::cube(n, 0.0, 1.0); }

Box random_box(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> lo(-2.0, 1.0);
  std::uniform_real_distribution<double> len(0.2, 2.0);
  Eigen::VectorXd a(n), b(n);
  for (int i = 0; i < n; ++i) {
    a[i] = lo(rng);
    b[i] = a[i] + len(rng);
  }
  return Box(a, b);
}

}  // namespace

TEST_CASE("inclusion-exclusion on F = xy") {
  const auto F = [](const Eigen::VectorXd& p) { return p[0] * p[1]; };
  CHECK(vertex_sum<double>(unit(2), F) == 1.0);
  const Box b(Eigen::Vector2d(-1.0, 2.0), Eigen::Vector2d(3.0, 2.5));
  // f = 1, so the sum is the box area.
  CHECK(vertex_sum<double>(b, F) == doctest::Approx(4.0 * 0.5).epsilon(1e-15));
}

TEST_CASE("sign rule for n = 1 and n = 3") {
  std::mt19937_64 rng(3);
  const Network n1 = random_monotone(rng, 1);
  const Box b1(Eigen::VectorXd::Constant(1, -0.7), Eigen::VectorXd::Constant(1, 1.9));
  CHECK(box_integral(n1, b1) ==
        net_F(n1, Eigen::VectorXd::Constant(1, 1.9)) - net_F(n1, Eigen::VectorXd::Constant(1, -0.7)));

  const Network n3 = random_plain(rng, 3);
  const Box b3 = random_box(rng, 3);
  const auto& a = b3.lower;
  const auto& c = b3.upper;
  auto F = [&](double x, double y, double z) { return net_F(n3, Eigen::Vector3d(x, y, z)); };
  const double hand = F(c[0], c[1], c[2]) - F(a[0], c[1], c[2]) - F(c[0], a[1], c[2]) - F(c[0], c[1], a[2]) +
                      F(a[0], a[1], c[2]) + F(a[0], c[1], a[2]) + F(c[0], a[1], a[2]) - F(a[0], a[1], a[2]);
  CHECK(box_integral(n3, b3) == doctest::Approx(hand).epsilon(1e-13));
}

TEST_CASE("collapsing a side drives the integral to zero") {
  std::mt19937_64 rng(5);
  for (int n = 1; n <= 4; ++n) {
    const Network net = random_monotone(rng, n);
    Box box = random_box(rng, n);
    double previous = std::abs(box_integral(net, box));
    for (double width : {1e-1, 1e-3, 1e-5, 1e-7}) {
      box.upper[n - 1] = box.lower[n - 1] + width;
      const double now = std::abs(box_integral(net, box));
      CHECK(now <= previous + 1e-15);
      previous = now;
    }
    CHECK(previous < 1e-6);
  }
}

TEST_CASE("box integral against quadrature of f") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 1 + trial % 3;
    const Network net = random_monotone(rng, n, 2, 8);
    const Box box = random_box(rng, n);
    const double exact = box_integral(net, box);
    const auto q = oracles::quad_integral([&](const Eigen::VectorXd& x) { return net_f(net, x); }, box,
                                          1e-6 * std::max(1.0, std::abs(exact)));
    CHECK_MESSAGE(rel_err(exact, q.estimate) < 1e-3, "trial ", trial, " n ", n);
  }
}

TEST_CASE("dimension checks") {
  const Network net = linear(1.0);
  CHECK_THROWS_AS(box_integral(net, unit(2)), std::invalid_argument);
  const Network big = net_init(Architecture::plain(21, {1}), 1);
  CHECK_THROWS_AS(box_integral(big, unit(21)), std::invalid_argument);
  ConstrainedModel m{net, {ConstraintKind::equality, 1.0, unit(2)}};
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  CHECK_THROWS_AS(eval_f(m, Eigen::VectorXd::Zero(1)), std::invalid_argument);
}

TEST_CASE("scale factor examples") {
  SUBCASE("from the raw integral") {
    const Constraint eq{ConstraintKind::equality, 2.0, unit(1)};
    CHECK(scale_from_integral(eq, 4.0) == 0.5);
    const Constraint ineq{ConstraintKind::inequality, 1.0, unit(1)};
    CHECK(scale_from_integral(ineq, 0.25) == 1.0);
    CHECK(scale_from_integral(ineq, 5.0) == 0.2);
    CHECK(scale_from_integral(Constraint{}, 3.0) == 1.0);
  }
  SUBCASE("through a network") {
    ConstrainedModel eq{linear(-4.0, 0.3), {ConstraintKind::equality, 2.0, unit(1)}};
    CHECK(scale_factor(eq) == 0.5);
    ConstrainedModel off{linear(0.25), {ConstraintKind::inequality, 1.0, unit(1)}};
    CHECK(scale_factor(off) == 1.0);
    CHECK(constraint_residual(off) == 0.0);
    ConstrainedModel on{linear(5.0), {ConstraintKind::inequality, 1.0, unit(1)}};
    CHECK(scale_factor(on) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(constrained_integral(on) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("degenerate normaliser") {
    ConstrainedModel flat{linear(0.0, 1.0), {ConstraintKind::equality, 1.0, unit(1)}};
    CHECK_THROWS_AS(scale_factor(flat), NumericalError);
    flat.net = linear(5e-10, 1.0);
    CHECK_THROWS_AS(eval_f(flat, Eigen::VectorXd::Zero(1)), NumericalError);
    flat.net = linear(2e-9, 1.0);
    CHECK(scale_factor(flat) == doctest::Approx(5e8));
  }
  SUBCASE("inequality preconditions") {
    ConstrainedModel neg{linear(1.0), {ConstraintKind::inequality, -1.0, unit(1)}};
    CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
    ConstrainedModel signed_net{net_init(Architecture::plain(1, {3}), 1),
                                {ConstraintKind::inequality, 1.0, unit(1)}};
    CHECK_THROWS_AS(signed_net.validate(), std::invalid_argument);
  }
}

TEST_CASE("no constraint leaves f alone") {
  std::mt19937_64 rng(9);
  const ConstrainedModel m{random_monotone(rng, 2), {}};
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd x = uniform_point(rng, 2, -2.0, 2.0);
    CHECK(eval_f(m, x) == net_f(m.net, x));
    CHECK(eval_F(m, x) == net_F(m.net, x));
  }
}

TEST_CASE("equality constraint holds for arbitrary parameters") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> eps(-5.0, 5.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 4;
    const bool positive = trial % 3 != 0;
    double e = positive ? std::abs(eps(rng)) + 0.1 : eps(rng);
    if (trial == 0) e = 2.0;
    ConstrainedModel m{positive ? random_monotone(rng, n) : random_plain(rng, n),
                       {ConstraintKind::equality, e, random_box(rng, n)}};
    // Scale the raw parameters to move far from init.
    m.net.set_parameters(m.net.parameters() * (0.5 + 3.0 * (trial % 5) / 4.0));
    double raw = box_integral(m.net, m.constraint.domain);
    if (std::abs(raw) < 1e-6) continue;
    const double s = scale_factor(m);
    const double got = vertex_sum<double>(m.constraint.domain,
                                          [&](const Eigen::VectorXd& p) { return eval_F(m, p); });
    worst = std::max(worst, std::abs(got - e) / std::max(1.0, std::abs(e)));
    CHECK(s * raw == doctest::Approx(e));
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("inequality constraint never exceeds epsilon") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 3;
    ConstrainedModel m{random_monotone(rng, n), {ConstraintKind::inequality, 0.05 + 0.1 * (trial % 10), random_box(rng, n)}};
    CHECK(constrained_integral(m) <= m.constraint.epsilon * (1.0 + 1e-9));
    CHECK(constraint_residual(m) == 0.0);
  }
}

TEST_CASE("scale commutes with differentiation") {
  std::mt19937_64 rng(17);
  for (int n = 1; n <= 4; ++n) {
    const ConstrainedModel m{random_monotone(rng, n), {ConstraintKind::equality, 1.5, random_box(rng, n)}};
    const double s = scale_factor(m);
    const ModelEvaluator ev(m);
    CHECK(ev.scale() == s);
    for (int i = 0; i < 5; ++i) {
      const Eigen::VectorXd x = uniform_point(rng, n, -2.0, 2.0);
      CHECK(eval_f(m, x) == s * net_f(m.net, x));
      CHECK(ev.f(x) == eval_f(m, x));
      CHECK(ev.F(x) == eval_F(m, x));
      CHECK(ev.partial(x, 1) == s * net_partial(m.net, x, 1));
    }
    CHECK(ev.integral(m.constraint.domain) == doctest::Approx(1.5).epsilon(1e-12));
  }
}

TEST_CASE("gradient of eval_f includes the scale path") {
  std::mt19937_64 rng(19);
  int checked = 0;
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 1 + trial % 3;
    const ConstrainedModel m{random_monotone(rng, n, 2, 6), {ConstraintKind::equality, 2.0, random_box(rng, n)}};
    const Eigen::VectorXd x = uniform_point(rng, n, -1.0, 1.0);
    const auto vg = eval_f_grads(m, x);
    CHECK(vg.value == doctest::Approx(eval_f(m, x)).epsilon(1e-14));
    for (Eigen::Index k = 0; k < vg.gradient.size(); ++k) {
      const double w = m.net.parameters()[k];
      if (std::abs(w) < 1e-2) continue;
      const double fd = oracles::fd_derivative(
          [&](double v) {
            ConstrainedModel probe = m;
            Eigen::VectorXd p = m.net.parameters();
            p[k] = v;
            probe.net.set_parameters(p);
            return eval_f(probe, x);
          },
          w, std::min(1e-4, 0.25 * std::abs(w)));
      if (std::abs(fd) < 1e-6) continue;
      CHECK_MESSAGE(rel_err(vg.gradient[k], fd) < 1e-4, "trial ", trial, " param ", k);
      ++checked;
    }
  }
  CHECK(checked > 50);

  // The output bias cancels in every vertex sum and in f, so its gradient is 0.
  const ConstrainedModel m{linear(3.0, 0.7), {ConstraintKind::equality, 2.0, unit(1)}};
  const auto vg = eval_f_grads(m, Eigen::VectorXd::Zero(1));
  CHECK(vg.value == doctest::Approx(2.0));
  CHECK(vg.gradient[0] == doctest::Approx(0.0));
  CHECK(vg.gradient[1] == 0.0);
}

TEST_CASE("constraint kind names") {
  for (ConstraintKind k : {ConstraintKind::none, ConstraintKind::equality, ConstraintKind::inequality})
    CHECK(constraint_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(constraint_kind_from_string("strict"), std::invalid_argument);
}
