#include "finn/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "finn/activation.hpp"
#include "finn/apps.hpp"
#include "finn/oracles.hpp"

namespace finn::verify {

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

// Random monotone network: 1..3 hidden layers of width 1..16, default init
// with every parameter stretched by a factor in [0.5, 3].
Network random_monotone(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> depth(1, 3);
  std::uniform_int_distribution<int> width(1, 16);
  std::vector<int> hidden(static_cast<std::size_t>(depth(rng)));
  for (int& w : hidden) w = width(rng);
  Network net = net_init(Architecture::monotone(n, hidden), rng());
  std::uniform_real_distribution<double> stretch(0.5, 3.0);
  net.set_parameters(net.parameters() * stretch(rng));
  return net;
}

Box random_box(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> lo(-2.0, 1.0);
  std::uniform_real_distribution<double> side(0.5, 2.0);
  Eigen::VectorXd a(n), b(n);
  for (int i = 0; i < n; ++i) {
    a[i] = lo(rng);
    b[i] = a[i] + side(rng);
  }
  return Box(a, b);
}

Outcome mixed_partials() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  int checked = 0, failed = 0;
  double worst = 0.0;
  for (int m = 0; m < 100; ++m) {
    const int n = 1 + m % 3;
    const Network net = random_monotone(rng, n);
    const auto F = [&](const Eigen::VectorXd& x) { return net_F(net, x); };
    for (int p = 0; p < 10; ++p) {
      Eigen::VectorXd x(n);
      for (int i = 0; i < n; ++i) x[i] = coord(rng);
      const double f = net_f(net, x);
      if (std::abs(f) <= 1e-3) continue;
      const double fd = oracles::fd_mixed_partial_richardson(F, x, full_mask(n), 1e-2);
      const double e = rel_err(f, fd);
      worst = std::max(worst, e);
      ++checked;
      if (!(e <= 1e-4)) ++failed;
    }
  }
  return {failed == 0 && checked > 0,
          std::to_string(checked) + " points, worst rel " + fmt("%.2e", worst) + ", failures " + std::to_string(failed)};
}

Outcome integral_vs_quadrature() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int m = 0; m < 20; ++m) {
    const int n = 1 + m % 3;
    const Network net = random_monotone(rng, n);
    const Box box = random_box(rng, n);
    const double analytic = box_integral(net, box);
    const auto q = oracles::quad_integral([&](const Eigen::VectorXd& x) { return net_f(net, x); }, box,
                                          1e-6 * std::max(std::abs(analytic), 1e-6));
    worst = std::max(worst, rel_err(analytic, q.estimate));
  }
  return {worst <= 1e-3, "20 models, worst rel " + fmt("%.2e", worst)};
}

Outcome positivity() {
  std::mt19937_64 rng(303);
  double lowest = std::numeric_limits<double>::infinity();
  // 50 models x 2000 points = 1e5 evaluations in total.
  for (int m = 0; m < 50; ++m) {
    const int n = 1 + m % 3;
    ConstrainedModel model{random_monotone(rng, n), {}};
    if (m % 2 == 1) model.constraint = {ConstraintKind::equality, 1.0 + m, Box::cube(n, -1.0, 1.0)};
    lowest = std::min(lowest, min_f_probe(model, Box::cube(n, -6.0, 6.0), 2000, rng()));
  }
  return {lowest >= -1e-12, "min f over 1e5 points " + fmt("%.3e", lowest)};
}

double bump(const Eigen::VectorXd& x) {
  const double mass = std::erf(3.0 / std::numbers::sqrt2);
  return std::exp(-0.5 * x.squaredNorm()) / std::sqrt(2.0 * std::numbers::pi) / mass;
}

Outcome constraint_exactness() {
  std::mt19937_64 rng(404);
  double worst_init = 0.0;
  for (int m = 0; m < 20; ++m) {
    const int n = 1 + m % 3;
    const double eps = (m % 2 ? -1.0 : 1.0) * std::pow(10.0, m % 5 - 2);
    const ConstrainedModel model{random_monotone(rng, n), {ConstraintKind::equality, eps, random_box(rng, n)}};
    worst_init = std::max(worst_init, std::abs(constrained_integral(model) - eps) / std::max(1.0, std::abs(eps)));
  }

  TrainConfig cfg;
  cfg.steps = 2000;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-2;
  cfg.seed = 4;
  cfg.log_every = 500;
  cfg.probe_points = 16;
  const Box domain = Box::cube(1, -3.0, 3.0);
  const ConstrainedModel eq{net_init(Architecture::monotone(1, {8}), 9), {ConstraintKind::equality, 1.0, domain}};
  double worst_train = std::abs(constrained_integral(eq) - 1.0);
  int steps_seen = 0;
  train(eq, Dataset::generator(bump, domain), cfg, [&](int, const ConstrainedModel& now, double) {
    worst_train = std::max(worst_train, std::abs(constrained_integral(now) - 1.0));
    ++steps_seen;
  });

  // Inequality: target mass 1, bound 0.25, so the clamp is active.
  const ConstrainedModel ineq{net_init(Architecture::monotone(1, {8}), 10),
                              {ConstraintKind::inequality, 0.25, domain}};
  double worst_excess = 0.0;
  cfg.steps = 500;
  train(ineq, Dataset::generator(bump, domain), cfg, [&](int, const ConstrainedModel& now, double) {
    worst_excess = std::max(worst_excess, constrained_integral(now) - 0.25 * (1.0 + 1e-9));
  });

  const bool ok = worst_init <= 1e-9 && worst_train <= 1e-9 && steps_seen == 2000 && worst_excess <= 0.0;
  return {ok, "init worst " + fmt("%.2e", worst_init) + ", training worst " + fmt("%.2e", worst_train) +
                  " over " + std::to_string(steps_seen) + " steps, inequality excess " + fmt("%.2e", worst_excess)};
}

Outcome gmm_volume() {
  TrainConfig cfg;
  cfg.steps = 3000;
  cfg.batch_size = 128;
  cfg.learning_rate = 3e-3;
  cfg.seed = 1;
  cfg.log_every = 500;
  GmmExperimentOptions opt;
  opt.probe_points = 20000;
  const GmmSpec spec = GmmSpec::two_mode_2d();
  std::vector<GmmRun> runs;
  double slowest = 0.0;
  for (double eps : {1.0, 2.0, 3.0}) {
    const auto t0 = Clock::now();
    auto one = gmm_volume_experiment(spec, {eps}, cfg, opt);
    slowest = std::max(slowest, std::chrono::duration<double>(Clock::now() - t0).count());
    runs.push_back(std::move(one.front()));
  }
  bool residuals = true, positive = true;
  for (const GmmRun& r : runs) {
    residuals = residuals && r.residual <= 1e-9;
    positive = positive && r.min_f >= -1e-12;
  }
  const double m1 = runs[0].grid_mse, m2 = runs[1].grid_mse, m3 = runs[2].grid_mse;
  const bool ok = m2 <= 1e-2 && m1 > m2 && m3 > m2 && residuals && positive && slowest < 600.0;
  return {ok, "mse eps1 " + fmt("%.3e", m1) + ", eps2 " + fmt("%.3e", m2) + ", eps3 " + fmt("%.3e", m3) +
                  (residuals ? ", residuals ok" : ", residual above 1e-9") + (positive ? "" : ", negative f") +
                  ", slowest run " + fmt("%.0f s", slowest)};
}

Outcome activation_family() {
  const IterErfTable& table = shared_erf_table();
  double worst_fd = 0.0;
  for (int k = 1; k <= 5; ++k) {
    for (int i = 0; i <= 120; ++i) {
      const double x = -6.0 + 0.1 * i;
      const double fd = oracles::fd_derivative([&](double t) { return act_eval(table, k, t); }, x, 1e-4);
      worst_fd = std::max(worst_fd, rel_err(fd, act_eval(table, k - 1, x)));
    }
  }
  double worst_quad = 0.0;
  const double lo = -12.0;
  for (int k = 1; k <= 5; ++k) {
    for (int i = 0; i <= 24; ++i) {
      const double x = -6.0 + 0.5 * i;
      const double q = oracles::simpson([&](double t) { return act_eval(table, k - 1, t); }, lo, x, 1e-11) +
                       act_eval(table, k, lo);
      worst_quad = std::max(worst_quad, std::abs(q - act_eval(table, k, x)));
    }
  }
  const double i1 = act_eval(table, 1, 0.0);
  const double i1_err = std::abs(i1 - 0.5 / std::sqrt(std::numbers::pi));
  return {worst_fd <= 1e-6 && worst_quad <= 1e-6 && i1_err <= 1e-12,
          "fd worst rel " + fmt("%.2e", worst_fd) + ", quadrature worst abs " + fmt("%.2e", worst_quad) +
              ", I1(0) err " + fmt("%.1e", i1_err)};
}

Outcome density_sampling() {
  const GmmSpec spec = GmmSpec::two_mode_1d();
  TrainConfig cfg;
  cfg.steps = 2000;
  cfg.batch_size = 128;
  cfg.learning_rate = 1e-2;
  cfg.seed = 1;
  const Dataset data = Dataset::generator([&](const Eigen::VectorXd& x) { return spec.pdf(x); }, spec.box);
  const TrainResult fit = fit_density(data, spec.box, {16}, 1.0, cfg);
  const ModelEvaluator eval(fit.model);
  const double a = spec.box.lower[0], b = spec.box.upper[0];
  const double Fa = eval.F(Eigen::VectorXd::Constant(1, a));
  const auto learned_cdf = [&](double x) { return eval.F(Eigen::VectorXd::Constant(1, std::clamp(x, a, b))) - Fa; };
  double sup = 0.0;
  for (int i = 0; i <= 1600; ++i) {
    const double x = a + (b - a) * i / 1600.0;
    sup = std::max(sup, std::abs(learned_cdf(x) - spec.normalised_cdf(x)));
  }
  const auto points = sample_density(fit.model, 10000, 7);
  std::vector<double> xs;
  for (const auto& p : points) xs.push_back(p[0]);
  const double ks = oracles::ks_statistic(xs, learned_cdf);
  return {ks <= 0.02 && sup <= 0.03, "KS " + fmt("%.4f", ks) + ", CDF sup error " + fmt("%.2e", sup)};
}

Outcome trajectory() {
  TrajectoryProblem problem;
  TrainConfig cfg;
  cfg.steps = 2000;
  cfg.learning_rate = 1e-2;
  cfg.seed = 1;
  cfg.log_every = 100;
  cfg.probe_points = 16;
  const TrajectoryReport r = trajectory_fit(problem, cfg);
  bool monotone = true;
  double previous = std::numeric_limits<double>::infinity();
  const std::size_t window = static_cast<std::size_t>(cfg.log_every);
  for (std::size_t i = 0; i + window <= r.step_losses.size(); i += window) {
    double mean = 0.0;
    for (std::size_t j = i; j < i + window; ++j) mean += r.step_losses[j];
    mean /= static_cast<double>(window);
    monotone = monotone && mean <= previous;
    previous = mean;
  }
  const bool ok = r.max_endpoint_residual <= 1e-6 && monotone && r.step_losses.size() == 2000;
  return {ok, "max endpoint residual " + fmt("%.2e", r.max_endpoint_residual) + ", final energy " +
                  fmt("%.4f", r.history.back().loss) + (monotone ? ", windows non-increasing" : ", windows rise")};
}

Outcome metric_bound_check() {
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int held = 0;
  double worst_ratio = 0.0;
  double worst_gap = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    const int n = 1 + inst % 2;
    const Box domain = random_box(rng, n);
    const double amp = 0.5 + u(rng), freq = 1.0 + 2.0 * u(rng);
    const double theta = 2.0 * std::numbers::pi * u(rng);
    const Eigen::Vector2d dir(std::cos(theta), std::sin(theta));
    const double shift = 0.5 + u(rng);
    MetricProblem p;
    p.domain = domain;
    p.phi = [amp, freq](const Eigen::VectorXd& x) {
      return Eigen::Vector2d(amp * std::sin(freq * x[0]), amp * std::cos(freq * x.sum())).eval();
    };
    p.nu = [dir](const Eigen::VectorXd& x) { return ((1.0 + 0.5 * std::tanh(x[0])) * dir).eval(); };
    p.target = [phi = p.phi, dir, shift](const Eigen::VectorXd& x) {
      return (phi(x) + (shift + 0.25 * std::sin(3.0 * x[0])) * dir).eval();
    };
    // Target deviation mass is shift * vol; keep the bound below it.
    p.epsilon = (0.2 + 0.5 * u(rng)) * shift * domain.volume();
    p.hidden = {16};
    TrainConfig cfg;
    cfg.steps = 400;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-2;
    cfg.seed = rng();
    cfg.log_every = 100;
    cfg.probe_points = 16;
    const MetricReport r = metric_bound(p, cfg);
    held += r.bound_holds ? 1 : 0;
    worst_ratio = std::max(worst_ratio, r.j_quadrature / p.epsilon);
    worst_gap = std::max(worst_gap, r.max_pointwise_gap);
  }
  return {held == 5 && worst_gap <= 1e-10, std::to_string(held) + "/5 within bound, max J/eps " +
                                              fmt("%.6f", worst_ratio) + ", pointwise gap " + fmt("%.1e", worst_gap)};
}

Outcome soft_bellman() {
  double worst_const = 0.0;
  Architecture one;
  one.input_dim = 1;
  one.positive = true;
  one.layers.push_back({1, 1, LayerKind::monotone_affine});
  for (double beta : {1.0, 10.0, 100.0})
    for (double c : {-0.3, 0.0, 0.7})
      for (const Box& box : {Box::cube(1, -1.0, 1.0), Box::cube(1, 0.0, 0.5)}) {
        const Network q(one, Eigen::Vector2d(std::exp(beta * c), 0.0));
        const double v = soft_value(q, box, beta);
        worst_const = std::max(worst_const, std::abs(v - (c + std::log(box.volume()) / beta)));
      }

  TrainConfig cfg;
  cfg.steps = 5000;
  cfg.batch_size = 64;
  cfg.learning_rate = 3e-3;
  cfg.seed = 1;
  cfg.log_every = 1000;
  cfg.probe_points = 16;
  double worst_quad = 0.0;
  std::vector<double> gaps;
  for (double beta : {1.0, 10.0, 100.0}) {
    SoftBellmanProblem p;
    p.beta = beta;
    const SoftBellmanReport r = soft_bellman_demo(p, cfg);
    double gap = 0.0;
    for (const ValueRow& row : r.values) {
      worst_quad = std::max(worst_quad, rel_err(row.integral, row.integral_quadrature));
      gap += std::abs(row.value - row.max_grid_q);
    }
    gaps.push_back(gap / static_cast<double>(r.values.size()));
  }
  const bool ok = worst_const <= 1e-6 && worst_quad <= 1e-3 && gaps[1] < gaps[0] && gaps[2] < gaps[1];
  return {ok, "constant-Q worst " + fmt("%.1e", worst_const) + ", quadrature worst rel " + fmt("%.1e", worst_quad) +
                  ", mean |V - max Q| " + fmt("%.4f", gaps[0]) + " / " + fmt("%.4f", gaps[1]) + " / " +
                  fmt("%.4f", gaps[2])};
}

const std::function<Outcome()>& check_fn(int id) {
  static const std::vector<std::function<Outcome()>> fns{
      mixed_partials, integral_vs_quadrature, positivity,  constraint_exactness, gmm_volume,
      activation_family, density_sampling,   trajectory,  metric_bound_check,   soft_bellman};
  return fns.at(static_cast<std::size_t>(id - 1));
}

}  // namespace

std::string check_name(int id) {
  static const std::vector<std::string> names{
      "mixed partials vs finite differences", "box integral vs quadrature", "positivity",
      "constraint exactness",                 "GMM volume experiment",      "activation family",
      "density fit and sampling",             "trajectory endpoints",       "metric bound",
      "soft Bellman values"};
  if (id < 1 || id > kCriterionCount) throw std::out_of_range("no such check");
  return names[static_cast<std::size_t>(id - 1)];
}

CheckResult run_check(int id) {
  CheckResult r;
  r.id = id;
  r.name = check_name(id);
  const auto t0 = Clock::now();
  try {
    const Outcome o = check_fn(id)();
    r.passed = o.passed;
    r.detail = o.detail;
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

std::vector<CheckResult> run_checks(const std::vector<int>& ids) {
  std::vector<CheckResult> out;
  for (int id : ids) out.push_back(run_check(id));
  return out;
}

std::vector<int> quick_ids() { return {1, 2, 3, 6}; }

std::vector<int> all_ids() {
  std::vector<int> ids;
  for (int i = 1; i <= kCriterionCount; ++i) ids.push_back(i);
  return ids;
}

std::string format_result(const CheckResult& r) {
  std::ostringstream out;
  out << (r.passed ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << ": " << r.detail << " ("
      << fmt("%.1f", r.seconds) << " s)";
  return out.str();
}

void print_table(std::ostream& out, const std::vector<CheckResult>& results) {
  int passed = 0;
  for (const CheckResult& r : results) {
    out << format_result(r) << '\n';
    passed += r.passed ? 1 : 0;
  }
  out << passed << "/" << results.size() << " checks passed\n";
}

}  // namespace finn::verify
