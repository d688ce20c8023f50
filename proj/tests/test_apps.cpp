#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "finn/apps.hpp"
#include "finn/errors.hpp"
#include "finn/oracles.hpp"
#include "test_util.hpp"

using namespace finn;
using finn::testing::rel_err;

namespace {

TrainConfig quick(int steps, double lr = 1e-2, int batch = 64) {
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.learning_rate = lr;
  cfg.batch_size = batch;
  cfg.seed = 1;
  cfg.log_every = 50;
  cfg.probe_points = 32;
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("finn_apps_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Eigen::VectorXd v1(double x) { return Eigen::VectorXd::Constant(1, x); }

// Network with every output weight zero, so f vanishes identically.
Network zero_output(int n) {
  Network net = net_init(Architecture::monotone(n, {4}), 5);
  Eigen::VectorXd p = net.parameters();
  const auto& arch = net.architecture();
  const std::size_t last = arch.layers.size() - 1;
  const auto offset = static_cast<Eigen::Index>(arch.layer_offset(last));
  p.segment(offset, arch.layers[last].in_dim).setZero();
  net.set_parameters(p);
  return net;
}

}  // namespace

TEST_CASE("mixture specs") {
  const GmmSpec g2 = GmmSpec::two_mode_2d();
  CHECK_NOTHROW(g2.validate());
  CHECK(g2.volume() == doctest::Approx(2.0).epsilon(1e-14));
  const auto quad = oracles::quad_integral([&](const Eigen::VectorXd& x) { return g2.pdf(x); }, g2.box, 1e-9);
  CHECK(quad.estimate == doctest::Approx(2.0).epsilon(1e-7));

  const GmmSpec g1 = GmmSpec::two_mode_1d();
  CHECK(g1.volume() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(g1.normalised_cdf(-4.0) == 0.0);
  CHECK(g1.normalised_cdf(4.0) == 1.0);
  double prev = 0.0;
  for (int i = 0; i <= 80; ++i) {
    const double c = g1.normalised_cdf(-4.0 + 0.1 * i);
    CHECK(c >= prev);
    prev = c;
  }
  const double x = 0.3;
  const double q = oracles::simpson([&](double t) { return g1.pdf(v1(t)); }, -4.0, x, 1e-12);
  CHECK(g1.normalised_cdf(x) == doctest::Approx(q).epsilon(1e-9));
  CHECK_THROWS_AS(g2.normalised_cdf(0.0), std::invalid_argument);

  GmmSpec bad = g1;
  bad.components[0].weight = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = g1;
  bad.components[0].sigma = Eigen::VectorXd::Constant(2, 1.0);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("fit_density on a uniform target") {
  const Box unit = Box::cube(1, 0.0, 1.0);
  const Dataset data = Dataset::generator([](const Eigen::VectorXd&) { return 1.0; }, unit);
  const TrainResult r = fit_density(data, unit, {8}, 1.0, quick(600));
  CHECK(std::abs(constrained_integral(r.model) - 1.0) <= 1e-9);
  const ModelEvaluator eval(r.model);
  double worst = 0.0;
  for (int i = 0; i <= 100; ++i) worst = std::max(worst, std::abs(eval.f(v1(0.01 * i)) - 1.0));
  CHECK(worst <= 0.05);

  const auto samples = sample_density(r.model, 10000, 3);
  std::vector<double> xs;
  for (const auto& s : samples) xs.push_back(s[0]);
  CHECK(oracles::ks_statistic(xs, [](double t) { return std::clamp(t, 0.0, 1.0); }) <= 0.02);
}

TEST_CASE("fit_density on the 1-D mixture") {
  const GmmSpec g = GmmSpec::two_mode_1d();
  const Dataset data = Dataset::generator([&](const Eigen::VectorXd& x) { return g.pdf(x); }, g.box);
  const TrainResult r = fit_density(data, g.box, {16}, 1.0, quick(1500, 1e-2, 128));
  const ModelEvaluator eval(r.model);
  double worst = 0.0;
  for (int i = 0; i <= 160; ++i) worst = std::max(worst, std::abs(eval.f(v1(-4.0 + 0.05 * i)) - g.pdf(v1(-4.0 + 0.05 * i))));
  CHECK(worst <= 0.05);
  // F is nondecreasing, so it acts as a CDF.
  double prev = -1e300;
  for (int i = 0; i <= 160; ++i) {
    const double F = eval.F(v1(-4.0 + 0.05 * i));
    CHECK(F >= prev);
    prev = F;
  }
}

TEST_CASE("conditional CDFs and 2-D sampling") {
  const GmmSpec g = GmmSpec::two_mode_2d().with_volume(1.0);
  const Dataset data = Dataset::generator([&](const Eigen::VectorXd& x) { return g.pdf(x); }, g.box);
  const TrainResult r = fit_density(data, g.box, {16, 16}, 1.0, quick(800, 1e-2, 64));
  const ModelEvaluator eval(r.model);
  const Box& box = r.model.constraint.domain;

  // First-dimension CDF against quadrature of the learned f.
  const Eigen::VectorXd none = Eigen::VectorXd::Zero(2);
  CHECK(conditional_cdf(eval, box, none, 0, -3.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(conditional_cdf(eval, box, none, 0, 3.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (double x : {-1.5, 0.0, 0.7}) {
    const Box left(Eigen::Vector2d(-3.0, -3.0), Eigen::Vector2d(x, 3.0));
    const double q = oracles::quad_integral([&](const Eigen::VectorXd& p) { return eval.f(p); }, left, 1e-8).estimate;
    CHECK(conditional_cdf(eval, box, none, 0, x) == doctest::Approx(q).epsilon(1e-5));
  }
  // Second-dimension CDF given x_1 is nondecreasing and spans [0, 1].
  const Eigen::Vector2d prefix(0.4, 0.0);
  double prev = -1.0;
  for (int i = 0; i <= 30; ++i) {
    const double c = conditional_cdf(eval, box, prefix, 1, -3.0 + 0.2 * i);
    CHECK(c >= prev - 1e-15);
    prev = c;
  }
  CHECK(prev == doctest::Approx(1.0).epsilon(1e-12));

  const auto samples = sample_density(r.model, 4000, 11);
  REQUIRE(samples.size() == 4000);
  std::vector<double> first, second;
  int near_modes = 0;
  for (const auto& s : samples) {
    CHECK(box.contains(s));
    first.push_back(s[0]);
    second.push_back(s[1]);
    if ((s - Eigen::Vector2d(-1.0, -0.8)).norm() < 1.5 || (s - Eigen::Vector2d(1.1, 1.0)).norm() < 1.5) ++near_modes;
  }
  CHECK(near_modes > 3600);
  // Marginal CDFs of the learned density from its box integrals.
  const auto marginal = [&](int axis) {
    return [&, axis](double t) {
      Eigen::Vector2d hi(3.0, 3.0);
      hi[axis] = std::clamp(t, -3.0, 3.0);
      if (hi[axis] <= -3.0) return 0.0;
      return eval.integral(Box(Eigen::Vector2d(-3.0, -3.0), hi));
    };
  };
  CHECK(oracles::ks_statistic(first, marginal(0)) <= 0.03);
  CHECK(oracles::ks_statistic(second, marginal(1)) <= 0.03);
}

TEST_CASE("sampling preconditions") {
  const Box unit = Box::cube(1, 0.0, 1.0);
  ConstrainedModel m{net_init(Architecture::monotone(1, {4}), 2), {ConstraintKind::inequality, 1.0, unit}};
  CHECK_THROWS_AS(sample_density(m, 10, 1), std::invalid_argument);
  m.constraint.kind = ConstraintKind::equality;
  CHECK_THROWS_AS(sample_density(m, -1, 1), std::invalid_argument);
  CHECK(sample_density(m, 0, 1).empty());
  m.constraint.epsilon = 1e-13;
  CHECK_THROWS_AS(sample_density(m, 1, 1), NumericalError);
}

TEST_CASE("gmm volume experiment plumbing") {
  const GmmSpec g = GmmSpec::two_mode_2d();
  GmmExperimentOptions opt;
  opt.hidden = {6};
  opt.grid_points = 5;
  opt.probe_points = 500;
  const auto runs = gmm_volume_experiment(g, {1.0, 2.0}, quick(30), opt);
  REQUIRE(runs.size() == 2);
  for (const GmmRun& r : runs) {
    CHECK(r.surface.size() == 25);
    CHECK(r.residual <= 1e-9);
    CHECK(r.min_f >= -1e-12);
    CHECK(r.grid_mse == grid_mse(r.surface));
    CHECK(r.result.history.back().step == 30);
  }
  CHECK(runs[0].surface.front().x == -3.0);
  CHECK(runs[0].surface.back().y == 3.0);
  CHECK(runs[1].surface[12].truth == doctest::Approx(g.pdf(Eigen::Vector2d(0.0, 0.0))));

  const auto dir = scratch_dir("surface");
  write_surface_csv((dir / "s.csv").string(), {{0.5, -1.0, 0.25, 1e-20}});
  CHECK(slurp((dir / "s.csv").string()) == "x,y,f,ground_truth\n0.5,-1,0.25,1e-20\n");
  write_points_csv((dir / "p.csv").string(), {Eigen::Vector2d(0.1, 2.0)});
  CHECK(slurp((dir / "p.csv").string()) == "x1,x2\n0.1,2\n");
  std::filesystem::remove_all(dir);
}

TEST_CASE("metric model algebra") {
  const Box box = Box::cube(2, 0.0, 1.0);
  MetricModel m;
  m.f = {zero_output(2), {ConstraintKind::inequality, 0.5, box}};
  m.phi = [](const Eigen::VectorXd& x) { return Eigen::Vector2d(x[0], -x[1]).eval(); };
  m.nu = [](const Eigen::VectorXd& x) { return Eigen::Vector2d(1.0 + x[0], 2.0).eval(); };
  {
    const ModelEvaluator eval(m.f);
    const Eigen::Vector2d x(0.3, 0.6);
    CHECK((m.psi(eval, x) - m.phi(x)).norm() == 0.0);
    CHECK(metric_j(m, box, 1e-9) == 0.0);
  }

  m.f.net = net_init(Architecture::monotone(2, {5}), 8);
  const ModelEvaluator eval(m.f);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd x = uniform_point(box, rng);
    CHECK(std::abs((m.psi(eval, x) - m.phi(x)).norm() - eval.f(x)) <= 1e-12);
  }
  CHECK(metric_j(m, box, 1e-9) == doctest::Approx(constrained_integral(m.f)).epsilon(1e-7));
  CHECK(constrained_integral(m.f) <= 0.5 * (1.0 + 1e-12));

  m.nu = [](const Eigen::VectorXd&) { return Eigen::Vector2d(1e-9, 0.0).eval(); };
  CHECK_THROWS_AS(m.psi(eval, Eigen::Vector2d(0.5, 0.5)), NumericalError);
}

TEST_CASE("metric bound after training") {
  MetricProblem p;
  p.domain = Box(Eigen::Vector2d(-1.0, 0.0), Eigen::Vector2d(0.5, 2.0));
  p.phi = [](const Eigen::VectorXd& x) { return Eigen::Vector2d(std::sin(x[0]), x[1]).eval(); };
  p.nu = [](const Eigen::VectorXd&) { return Eigen::Vector2d(0.0, 3.0).eval(); };
  p.target = [&](const Eigen::VectorXd& x) { return (p.phi(x) + Eigen::Vector2d(0.0, 1.0)).eval(); };
  p.epsilon = 1.0;  // target deviation mass is 3
  p.hidden = {8};
  const MetricReport r = metric_bound(p, quick(200));
  CHECK(r.bound_holds);
  CHECK(r.j_quadrature <= p.epsilon * (1.0 + 1e-3));
  CHECK(r.integral_f <= p.epsilon * (1.0 + 1e-9));
  CHECK(r.integral_f > 0.99 * p.epsilon);
  CHECK(r.max_pointwise_gap <= 1e-10);
  CHECK(r.history.size() == 200 / 50 + 1);
}

TEST_CASE("trajectory construction") {
  TrajectoryProblem p;
  const Trajectory tr = make_trajectory(p, 4);
  CHECK(tr.x(p.t0) == p.x0);
  CHECK((tr.x(p.T) - p.xT).cwiseAbs().maxCoeff() <= 1e-12);

  const double t = 0.37, h = 1e-5;
  const Eigen::Vector3d v = tr.xdot(t);
  const Eigen::Vector3d fd_v = (tr.x(t + h) - tr.x(t - h)) / (2 * h);
  const Eigen::Vector3d fd_a = (tr.xdot(t + h) - tr.xdot(t - h)) / (2 * h);
  for (int i = 0; i < 3; ++i) {
    CHECK(v[i] == doctest::Approx(fd_v[i]).epsilon(1e-6));
    CHECK(tr.xddot(t)[i] == doctest::Approx(fd_a[i]).epsilon(1e-5));
  }
  CHECK(tr.control(t, double_integrator) == tr.xddot(t));
  const InverseDynamics damped = [](const Vec3Var&, const Vec3Var& xd, const Vec3Var& xdd) {
    return Vec3Var{xdd[0] + xd[0] * 0.5, xdd[1] + xd[1] * 0.5, xdd[2] + xd[2] * 0.5};
  };
  CHECK(tr.control(t, damped)[1] == doctest::Approx(tr.xddot(t)[1] + 0.5 * v[1]));

  TrajectoryProblem still;
  still.xT = still.x0;
  const Trajectory rest = make_trajectory(still, 4);
  for (double s : {0.0, 0.3, 1.0}) CHECK(rest.x(s).norm() <= 1e-15);

  TrajectoryProblem bad;
  bad.T = bad.t0;
  CHECK_THROWS_AS(make_trajectory(bad, 1), std::invalid_argument);

  for (auto o : {TrajectoryObjective::energy, TrajectoryObjective::control, TrajectoryObjective::obstacle})
    CHECK(trajectory_objective_from_string(to_string(o)) == o);
  CHECK_THROWS_AS(trajectory_objective_from_string("speed"), std::invalid_argument);
}

TEST_CASE("trajectory fitting keeps the endpoints") {
  for (auto objective : {TrajectoryObjective::energy, TrajectoryObjective::control, TrajectoryObjective::obstacle}) {
    TrajectoryProblem p;
    p.objective = objective;
    p.hidden = {8};
    p.grid = 16;
    p.t0 = 0.5;
    p.T = 2.0;
    p.x0 = Eigen::Vector3d(1.0, -1.0, 0.0);
    const TrajectoryReport r = trajectory_fit(p, quick(150));
    CAPTURE(to_string(objective));
    CHECK(r.step_losses.size() == 150);
    CHECK(r.max_endpoint_residual <= 1e-6);
    CHECK(r.step_losses.back() < r.step_losses.front());
    CHECK((r.trajectory.x(p.T) - p.xT).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((r.trajectory.x(p.t0) - p.x0).norm() == 0.0);
  }

  TrajectoryProblem p;
  const TrajectoryReport r = trajectory_fit(p, quick(300));
  // The straight line at constant speed has energy |xT - x0|^2 / (T - t0) = 14.
  CHECK(r.history.back().loss > 13.5);
  CHECK(r.history.back().loss < 14.5);

  const auto dir = scratch_dir("traj");
  write_trajectory_csv((dir / "t.csv").string(), r.trajectory, p, 3);
  const std::string text = slurp((dir / "t.csv").string());
  CHECK(text.rfind("t,x1,x2,x3,v1,v2,v3,u1,u2,u3\n0,0,0,0,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("soft value analytic cases") {
  Architecture one;
  one.input_dim = 1;
  one.positive = true;
  one.layers.push_back({1, 1, LayerKind::monotone_affine});
  for (double beta : {1.0, 10.0, 100.0})
    for (double c : {-0.5, 0.2}) {
      const Network q(one, Eigen::Vector2d(std::exp(beta * c), 0.0));
      CHECK(soft_value(q, Box::cube(1, -1.0, 1.0), beta) == doctest::Approx(c + std::log(2.0) / beta).epsilon(1e-12));
    }
  CHECK_THROWS_AS(soft_value(Network(one, Eigen::Vector2d(0.0, 1.0)), Box::cube(1, -1.0, 1.0), 1.0), NumericalError);
  CHECK_THROWS_AS(soft_value(net_init(Architecture::plain(1, {3}), 1), Box::cube(1, -1.0, 1.0), 1.0),
                  std::invalid_argument);

  SoftBellmanProblem p;
  CHECK(toy_reward(p, 0.0, 0.0) == 0.0);
  CHECK(toy_reward(p, 0.5, 1.0) == doctest::Approx(-std::pow(1.0 - 0.5 * std::sin(1.5), 2)));
}

TEST_CASE("soft values of a hypernetwork") {
  SoftBellmanProblem p;
  p.eval_states = 3;
  p.q_grid = 401;
  const SoftBellmanReport r = soft_bellman_demo(p, quick(200, 3e-3));
  REQUIRE(r.values.size() == 3);
  CHECK(r.values[0].s == -1.0);
  CHECK(r.values[2].s == 1.0);
  CHECK(r.history.size() == 200 / 50 + 1);
  for (const HistoryRow& h : r.history) CHECK(h.min_f_probe >= 0.0);
  const double vol = p.action_box.volume();
  for (const ValueRow& v : r.values) {
    CHECK(rel_err(v.integral, v.integral_quadrature) <= 1e-6);
    CHECK(v.value == doctest::Approx(std::log(v.integral) / p.beta).epsilon(1e-14));
    // Uniform-grid lower bound on the log-integral.
    CHECK(v.value >= v.max_grid_q + std::log(vol / p.q_grid) / p.beta - 1e-3);
  }
  // The rows are a pure function of the trained hypernetwork.
  const auto again = soft_values(r.hypernet, p);
  CHECK(again[1].value == r.values[1].value);

  const auto dir = scratch_dir("values");
  write_values_csv((dir / "v.csv").string(), 10.0, {{0.0, -0.5, -0.5, 0.25, 0.25, 0.0}});
  CHECK(slurp((dir / "v.csv").string()) ==
        "beta,s,value,value_quadrature,integral,integral_quadrature,max_grid_q\n10,0,-0.5,-0.5,0.25,0.25,0\n");
  std::filesystem::remove_all(dir);

  SoftBellmanProblem bad;
  bad.beta = 0.0;
  CHECK_THROWS_AS(soft_values(r.hypernet, bad), std::invalid_argument);
}
