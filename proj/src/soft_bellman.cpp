#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "finn/apps.hpp"
#include "finn/errors.hpp"
#include "finn/oracles.hpp"
#include "io.hpp"

namespace finn {

namespace {

constexpr double kIntegralFloor = 1e-300;

void validate_problem(const SoftBellmanProblem& p) {
  if (!(p.beta > 0.0)) throw std::invalid_argument("soft bellman: beta must be positive");
  if (p.state_box.dim() != 1 || p.action_box.dim() != 1)
    throw std::invalid_argument("soft bellman: the toy problem has 1-D states and actions");
  p.state_box.validate();
  p.action_box.validate();
  if (!p.g) throw std::invalid_argument("soft bellman: missing g");
  if (p.eval_states < 1 || p.q_grid < 2) throw std::invalid_argument("soft bellman: bad evaluation grid");
}

double lerp(const Box& b, int i, int count) {
  if (count == 1) return 0.5 * (b.lower[0] + b.upper[0]);
  return b.lower[0] + (b.upper[0] - b.lower[0]) * i / (count - 1);
}

}  // namespace

double toy_reward(const SoftBellmanProblem& p, double s, double a) {
  const double d = a - p.g(s);
  return -d * d;
}

double soft_value(const Network& q_net, const Box& action_box, double beta) {
  if (!q_net.positive()) throw std::invalid_argument("soft_value: needs a positivity network");
  const double integral = box_integral(q_net, action_box);
  if (!(integral > kIntegralFloor)) throw NumericalError("soft value: action integral is not positive");
  return std::log(integral) / beta;
}

std::vector<ValueRow> soft_values(const HyperNetwork& h, const SoftBellmanProblem& problem) {
  validate_problem(problem);
  std::vector<ValueRow> rows;
  for (int i = 0; i < problem.eval_states; ++i) {
    ValueRow row;
    row.s = lerp(problem.state_box, i, problem.eval_states);
    const Network net = hypernet_apply(h, Eigen::VectorXd::Constant(1, row.s));
    row.integral = box_integral(net, problem.action_box);
    row.value = soft_value(net, problem.action_box, problem.beta);
    row.integral_quadrature =
        oracles::quad_integral([&](const Eigen::VectorXd& a) { return net_f(net, a); }, problem.action_box,
                               1e-9 * row.integral)
            .estimate;
    row.value_quadrature = std::log(std::max(row.integral_quadrature, kIntegralFloor)) / problem.beta;
    row.max_grid_q = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < problem.q_grid; ++j) {
      const double f = net_f(net, Eigen::VectorXd::Constant(1, lerp(problem.action_box, j, problem.q_grid)));
      row.max_grid_q = std::max(row.max_grid_q, std::log(std::max(f, kIntegralFloor)) / problem.beta);
    }
    rows.push_back(row);
  }
  return rows;
}

SoftBellmanReport soft_bellman_demo(const SoftBellmanProblem& problem, const TrainConfig& cfg) {
  validate_problem(problem);
  cfg.validate();
  SoftBellmanReport report;
  const Architecture target = Architecture::monotone(1, problem.target_hidden);
  report.hypernet = hypernet_init(1, problem.conditioner_hidden, target, cfg.seed);
  const HyperNetwork& h = report.hypernet;

  // Regression of Q = log(f) / beta onto the reward at uniform (s, a).
  Objective objective = [&](Tape&, std::span<const Var> theta, int, std::mt19937_64& rng) {
    Var total = 0.0;
    for (int i = 0; i < cfg.batch_size; ++i) {
      const Eigen::VectorXd s = uniform_point(problem.state_box, rng);
      const Eigen::VectorXd a = uniform_point(problem.action_box, rng);
      const std::vector<Var> generated = hypernet_generate<Var>(h, theta, s);
      const auto bound = bind_parameters<Var>(target, std::span<const Var>(generated));
      Var f = evaluate<Var>(target, bound, a, 1);
      if (!(f.value > kIntegralFloor)) f = Var(kIntegralFloor);
      total += square(log(f) / Var(problem.beta) - Var(toy_reward(problem, s[0], a[0])));
    }
    return total / Var(static_cast<double>(cfg.batch_size));
  };

  auto min_f = [&](const Eigen::VectorXd& params) {
    HyperNetwork probe = h;
    probe.params = params;
    std::mt19937_64 rng(cfg.seed ^ 0x70be5eedULL);
    double lowest = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg.probe_points; ++i) {
      const Network net = hypernet_apply(probe, uniform_point(problem.state_box, rng));
      lowest = std::min(lowest, net_f(net, uniform_point(problem.action_box, rng)));
    }
    return lowest;
  };

  Eigen::VectorXd params = h.params;
  minimize(params, objective, cfg, [&](int step, const Eigen::VectorXd& updated, double loss) {
    if (step % cfg.log_every == 0) report.history.push_back({step, loss, 0.0, min_f(updated)});
  });
  Tape tape;
  std::mt19937_64 rng(cfg.seed + 1);
  const std::vector<Var> theta = tape_inputs(tape, params);
  const double final_loss = objective(tape, std::span<const Var>(theta), cfg.steps, rng).value;
  report.history.push_back({cfg.steps, final_loss, 0.0, min_f(params)});
  report.hypernet.params = params;
  report.values = soft_values(report.hypernet, problem);
  return report;
}

void write_values_csv(const std::string& path, double beta, const std::vector<ValueRow>& rows) {
  std::ostringstream out;
  out << "beta,s,value,value_quadrature,integral,integral_quadrature,max_grid_q\n";
  for (const ValueRow& r : rows)
    out << io::shortest(beta) << ',' << io::shortest(r.s) << ',' << io::shortest(r.value) << ','
        << io::shortest(r.value_quadrature) << ',' << io::shortest(r.integral) << ','
        << io::shortest(r.integral_quadrature) << ',' << io::shortest(r.max_grid_q) << '\n';
  io::write_atomic(path, out.str());
}

}  // namespace finn
