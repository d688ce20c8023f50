#include <cmath>
#include <sstream>
#include <stdexcept>

#include "finn/apps.hpp"
#include "finn/errors.hpp"
#include "io.hpp"

namespace finn {

namespace {

// d^2/dt^2 of a scalar network of one input: both infinitesimals seeded on t,
// so the top coefficient of F(t + e1 + e2) is F''.
template <class T>
T second_derivative(const Architecture& arch, const BoundLayers<T>& bound, double t) {
  MultiDual<T> in(2, T(t));
  in[1] = T(1.0);
  in[2] = T(1.0);
  return forward<T>(arch, bound, {in}).front()[3];
}

Eigen::VectorXd scalar(double t) { return Eigen::VectorXd::Constant(1, t); }

std::array<ConstrainedModel, 3> axis_models(const TrajectoryProblem& p, const Architecture& arch,
                                            const Eigen::VectorXd& params) {
  const auto count = static_cast<Eigen::Index>(arch.parameter_count());
  const Box span = Box::cube(1, p.t0, p.T);
  std::array<ConstrainedModel, 3> axes;
  for (int i = 0; i < 3; ++i)
    axes[static_cast<std::size_t>(i)] = {Network(arch, params.segment(i * count, count)),
                                         {ConstraintKind::equality, p.xT[i] - p.x0[i], span}};
  return axes;
}

void validate_problem(const TrajectoryProblem& p) {
  if (!(p.T > p.t0)) throw std::invalid_argument("trajectory: need T > t0");
  if (p.grid < 1) throw std::invalid_argument("trajectory: grid must be positive");
  if (!p.dynamics) throw std::invalid_argument("trajectory: missing dynamics");
}

}  // namespace

Vec3Var double_integrator(const Vec3Var&, const Vec3Var&, const Vec3Var& xdd) { return xdd; }

std::string to_string(TrajectoryObjective o) {
  switch (o) {
    case TrajectoryObjective::energy:
      return "energy";
    case TrajectoryObjective::control:
      return "control";
    case TrajectoryObjective::obstacle:
      return "obstacle";
  }
  throw std::invalid_argument("unknown trajectory objective");
}

TrajectoryObjective trajectory_objective_from_string(const std::string& name) {
  if (name == "energy") return TrajectoryObjective::energy;
  if (name == "control") return TrajectoryObjective::control;
  if (name == "obstacle") return TrajectoryObjective::obstacle;
  throw std::invalid_argument("unknown trajectory objective: " + name);
}

Trajectory::Trajectory(std::array<ConstrainedModel, 3> axes, Eigen::Vector3d x0, double t0)
    : axes_(std::move(axes)), x0_(std::move(x0)), t0_(t0) {
  for (const ConstrainedModel& m : axes_) {
    m.validate();
    if (m.net.input_dim() != 1) throw std::invalid_argument("trajectory axes take time as the only input");
  }
}

Eigen::Vector3d Trajectory::x(double t) const {
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) {
    const ModelEvaluator eval(axes_[static_cast<std::size_t>(i)]);
    out[i] = eval.F(scalar(t)) - eval.F(scalar(t0_)) + x0_[i];
  }
  return out;
}

Eigen::Vector3d Trajectory::xdot(double t) const {
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) out[i] = eval_f(axes_[static_cast<std::size_t>(i)], scalar(t));
  return out;
}

Eigen::Vector3d Trajectory::xddot(double t) const {
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) {
    const ConstrainedModel& m = axes_[static_cast<std::size_t>(i)];
    out[i] = scale_factor(m) * second_derivative<double>(m.net.architecture(), m.net.bind(), t);
  }
  return out;
}

Eigen::Vector3d Trajectory::control(double t, const InverseDynamics& dynamics) const {
  const Eigen::Vector3d p = x(t), v = xdot(t), a = xddot(t);
  const Vec3Var u = dynamics({p[0], p[1], p[2]}, {v[0], v[1], v[2]}, {a[0], a[1], a[2]});
  return {u[0].value, u[1].value, u[2].value};
}

Trajectory make_trajectory(const TrajectoryProblem& problem, std::uint64_t seed) {
  validate_problem(problem);
  const Architecture arch = Architecture::plain(1, problem.hidden);
  const auto count = static_cast<Eigen::Index>(arch.parameter_count());
  Eigen::VectorXd params(3 * count);
  for (int i = 0; i < 3; ++i) params.segment(i * count, count) = init_parameters(arch, seed + i);
  return Trajectory(axis_models(problem, arch, params), problem.x0, problem.t0);
}

TrajectoryReport trajectory_fit(const TrajectoryProblem& problem, const TrainConfig& cfg) {
  cfg.validate();
  const Trajectory init = make_trajectory(problem, cfg.seed);
  const Architecture arch = init.axes()[0].net.architecture();
  const auto count = static_cast<Eigen::Index>(arch.parameter_count());
  Eigen::VectorXd params(3 * count);
  for (int i = 0; i < 3; ++i) params.segment(i * count, count) = init.axes()[static_cast<std::size_t>(i)].net.parameters();
  const auto shapes = axis_models(problem, arch, params);

  const double h = (problem.T - problem.t0) / problem.grid;
  const bool need_x = problem.objective != TrajectoryObjective::energy;
  const bool need_acc = problem.objective == TrajectoryObjective::control;

  // Deterministic objective on a midpoint grid over [t0, T].
  Objective objective = [&](Tape&, std::span<const Var> theta, int, std::mt19937_64&) {
    std::array<BoundLayers<Var>, 3> bound;
    std::array<Var, 3> scale;
    std::array<Var, 3> base;
    for (std::size_t i = 0; i < 3; ++i) {
      bound[i] = bind_parameters<Var>(arch, theta.subspan(i * static_cast<std::size_t>(count),
                                                          static_cast<std::size_t>(count)));
      scale[i] = scale_factor<Var>(shapes[i], bound[i]);
      if (need_x) base[i] = evaluate<Var>(arch, bound[i], scalar(problem.t0), 0);
    }
    Var total = 0.0;
    for (int j = 0; j < problem.grid; ++j) {
      const double t = problem.t0 + (j + 0.5) * h;
      Vec3Var x, xd, xdd;
      for (std::size_t i = 0; i < 3; ++i) {
        xd[i] = scale[i] * evaluate<Var>(arch, bound[i], scalar(t), 1);
        if (need_x)
          x[i] = scale[i] * (evaluate<Var>(arch, bound[i], scalar(t), 0) - base[i]) +
                 Var(problem.x0[static_cast<Eigen::Index>(i)]);
        if (need_acc) xdd[i] = scale[i] * second_derivative<Var>(arch, bound[i], t);
      }
      Var term = 0.0;
      switch (problem.objective) {
        case TrajectoryObjective::energy:
          term = square(xd[0]) + square(xd[1]) + square(xd[2]);
          break;
        case TrajectoryObjective::control: {
          const Vec3Var u = problem.dynamics(x, xd, xdd);
          term = square(u[0]) + square(u[1]) + square(u[2]);
          break;
        }
        case TrajectoryObjective::obstacle: {
          term = square(xd[0]) + square(xd[1]) + square(xd[2]);
          Var d2 = 0.0;
          for (std::size_t i = 0; i < 3; ++i)
            d2 += square(x[i] - Var(problem.obstacle_center[static_cast<Eigen::Index>(i)]));
          const Var pen = Var(problem.obstacle_radius * problem.obstacle_radius) - d2;
          if (pen.value > 0.0) term += Var(problem.obstacle_weight) * square(pen);
          break;
        }
      }
      total += term;
    }
    return total * Var(h);
  };

  TrajectoryReport report;
  auto endpoint_residual = [&](const Eigen::VectorXd& p) {
    const Trajectory tr(axis_models(problem, arch, p), problem.x0, problem.t0);
    return (tr.x(problem.T) - problem.xT).cwiseAbs().maxCoeff();
  };
  auto min_velocity = [&](const Eigen::VectorXd& p) {
    const auto axes = axis_models(problem, arch, p);
    double lowest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < 3; ++i)
      lowest = std::min(lowest, min_f_probe(axes[i], axes[i].constraint.domain, cfg.probe_points,
                                            cfg.seed ^ 0x70be5eedULL));
    return lowest;
  };
  minimize(params, objective, cfg, [&](int step, const Eigen::VectorXd& updated, double loss) {
    report.step_losses.push_back(loss);
    const double r = endpoint_residual(updated);
    report.max_endpoint_residual = std::max(report.max_endpoint_residual, r);
    if (step % cfg.log_every == 0) report.history.push_back({step, loss, r, min_velocity(updated)});
  });
  Tape tape;
  std::mt19937_64 rng(cfg.seed + 1);
  const std::vector<Var> theta = tape_inputs(tape, params);
  const double final_loss = objective(tape, std::span<const Var>(theta), cfg.steps, rng).value;
  report.history.push_back({cfg.steps, final_loss, endpoint_residual(params), min_velocity(params)});
  report.trajectory = Trajectory(axis_models(problem, arch, params), problem.x0, problem.t0);
  return report;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj, const TrajectoryProblem& problem,
                          int points) {
  if (points < 2) throw std::invalid_argument("trajectory csv needs at least 2 points");
  std::ostringstream out;
  out << "t,x1,x2,x3,v1,v2,v3,u1,u2,u3\n";
  for (int j = 0; j < points; ++j) {
    const double t = problem.t0 + (problem.T - problem.t0) * j / (points - 1);
    const Eigen::Vector3d x = traj.x(t), v = traj.xdot(t), u = traj.control(t, problem.dynamics);
    out << io::shortest(t);
    for (const Eigen::Vector3d* row : {&x, &v, &u})
      for (int i = 0; i < 3; ++i) out << ',' << io::shortest((*row)[i]);
    out << '\n';
  }
  io::write_atomic(path, out.str());
}

}  // namespace finn
