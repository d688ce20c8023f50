#include <cmath>
#include <random>
#include <stdexcept>

#include "finn/apps.hpp"
#include "finn/errors.hpp"
#include "finn/oracles.hpp"

namespace finn {

namespace {

Eigen::VectorXd unit_direction(const VectorField& nu, const Eigen::VectorXd& x) {
  const Eigen::VectorXd v = nu(x);
  const double norm = v.norm();
  if (!(norm >= kDirectionGuard)) throw NumericalError("singular direction: |nu(x)| below guard");
  return v / norm;
}

}  // namespace

Eigen::VectorXd MetricModel::psi(const ModelEvaluator& eval, const Eigen::VectorXd& x) const {
  return phi(x) + eval.f(x) * unit_direction(nu, x);
}

double metric_j(const MetricModel& model, const Box& domain, double tol, double* std_error) {
  const ModelEvaluator eval(model.f);
  const auto r = oracles::quad_integral(
      [&](const Eigen::VectorXd& x) { return (model.phi(x) - model.psi(eval, x)).norm(); }, domain, tol);
  if (std_error) *std_error = r.std_error;
  return r.estimate;
}

MetricReport metric_bound(const MetricProblem& problem, const TrainConfig& cfg) {
  problem.domain.validate();
  if (!problem.phi || !problem.nu || !problem.target) throw std::invalid_argument("metric: missing function");
  if (!(problem.epsilon > 0.0)) throw std::invalid_argument("metric: epsilon must be positive");
  const int n = problem.domain.dim();
  ConstrainedModel f{net_init(Architecture::monotone(n, problem.hidden), cfg.seed),
                     {ConstraintKind::inequality, problem.epsilon, problem.domain}};
  const ConstrainedModel shape = f;
  const Mask full = full_mask(n);

  Objective objective = [&](Tape&, std::span<const Var> theta, int, std::mt19937_64& rng) {
    const Architecture& arch = shape.net.architecture();
    const auto bound = bind_parameters<Var>(arch, theta);
    const Var s = scale_factor<Var>(shape, bound);
    Var total = 0.0;
    for (int i = 0; i < cfg.batch_size; ++i) {
      const Eigen::VectorXd x = uniform_point(problem.domain, rng);
      const Var fx = s * evaluate<Var>(arch, bound, x, full);
      const Eigen::VectorXd u = unit_direction(problem.nu, x);
      const Eigen::VectorXd gap = problem.phi(x) - problem.target(x);
      for (Eigen::Index d = 0; d < gap.size(); ++d) total += square(fx * u[d] + gap[d]);
    }
    return total / Var(static_cast<double>(cfg.batch_size));
  };
  TrainResult trained = train_objective(std::move(f), objective, problem.domain, cfg);

  MetricReport report;
  report.model = {std::move(trained.model), problem.phi, problem.nu};
  report.history = std::move(trained.history);
  report.integral_f = constrained_integral(report.model.f);
  const double tol = (n <= 3 ? 1e-7 : 1e-4) * problem.epsilon;
  report.j_quadrature = metric_j(report.model, problem.domain, tol, &report.j_std_error);
  report.bound_holds = report.j_quadrature <= problem.epsilon * (1.0 + 1e-3);

  const ModelEvaluator eval(report.model.f);
  std::mt19937_64 rng(cfg.seed ^ 0x3e7a1cULL);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd x = uniform_point(problem.domain, rng);
    if (problem.nu(x).norm() < 1e-6) continue;
    const double gap = std::abs((report.model.psi(eval, x) - problem.phi(x)).norm() - eval.f(x));
    report.max_pointwise_gap = std::max(report.max_pointwise_gap, gap);
  }
  return report;
}

}  // namespace finn
