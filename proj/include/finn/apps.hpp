#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "finn/integral.hpp"
#include "finn/network.hpp"
#include "finn/training.hpp"

namespace finn {

// ---------------------------------------------------------------------------
// Gaussian mixtures and density models

struct GmmComponent {
  Eigen::VectorXd mean;
  Eigen::VectorXd sigma;  // per-axis standard deviation
  double weight = 1.0;
};

// Weighted sum of axis-aligned Gaussians. Weights need not sum to one; the
// mixture's mass over `box` is its volume.
struct GmmSpec {
  std::vector<GmmComponent> components;
  Box box;

  int dim() const { return box.dim(); }
  double pdf(const Eigen::VectorXd& x) const;
  // Exact mass over a box, from erf.
  double mass(const Box& b) const;
  double volume() const { return mass(box); }
  // Mass of [box.lower_1, x] (1-D only) divided by the volume.
  double normalised_cdf(double x) const;
  // Copy with weights rescaled so volume() == v.
  GmmSpec with_volume(double v) const;
  void validate() const;

  // Two modes on [-3, 3]^2 with total volume 2.
  static GmmSpec two_mode_2d();
  // Two-component density on [-4, 4] with unit mass.
  static GmmSpec two_mode_1d();
};

// Positive monotone network with an equality constraint over `domain`,
// trained by MSE on f against `data`. epsilon = 1 gives a density.
TrainResult fit_density(const Dataset& data, const Box& domain, const std::vector<int>& hidden,
                        double epsilon, const TrainConfig& cfg, const ModelObserver& observer = {});

inline constexpr double kSampleTolerance = 1e-10;
inline constexpr double kFlatConditional = 1e-12;

// Conditional CDF of dimension k (0-based) at x_k given x_0..x_{k-1} in
// `prefix`, with the later dimensions integrated over the model's domain.
double conditional_cdf(const ModelEvaluator& eval, const Box& domain, const Eigen::VectorXd& prefix,
                       int k, double xk);

// Dimension-by-dimension inverse-CDF sampling with bisection. Requires a
// positivity model with an equality constraint; throws NumericalError on a
// flat conditional.
std::vector<Eigen::VectorXd> sample_density(const ConstrainedModel& model, int count, std::uint64_t seed);

struct SurfaceRow {
  double x = 0.0;
  double y = 0.0;
  double f = 0.0;
  double truth = 0.0;
};

struct GmmRun {
  double epsilon = 0.0;
  TrainResult result;
  double grid_mse = 0.0;
  double residual = 0.0;
  double min_f = 0.0;
  std::vector<SurfaceRow> surface;
};

struct GmmExperimentOptions {
  std::vector<int> hidden{32, 32};
  int grid_points = 41;  // per axis
  int probe_points = 20000;
};

// Fits one equality-constrained model per epsilon to the mixture's pdf.
std::vector<GmmRun> gmm_volume_experiment(const GmmSpec& spec, const std::vector<double>& eps_list,
                                          const TrainConfig& cfg, const GmmExperimentOptions& opt = {});

std::vector<SurfaceRow> surface_grid(const ModelEvaluator& eval, const GmmSpec& spec, int points);
double grid_mse(const std::vector<SurfaceRow>& rows);
void write_surface_csv(const std::string& path, const std::vector<SurfaceRow>& rows);
void write_points_csv(const std::string& path, const std::vector<Eigen::VectorXd>& points);

// ---------------------------------------------------------------------------
// Integral-bounded deviation from a base function

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline constexpr double kDirectionGuard = 1e-8;

// psi(x) = phi(x) + f(x) nu(x) / |nu(x)| with f a positive model under an
// inequality constraint.
struct MetricModel {
  ConstrainedModel f;
  VectorField phi;
  VectorField nu;

  Eigen::VectorXd psi(const ModelEvaluator& eval, const Eigen::VectorXd& x) const;
};

struct MetricProblem {
  VectorField phi;
  VectorField nu;
  VectorField target;
  Box domain;
  double epsilon = 1.0;
  std::vector<int> hidden{16, 16};
};

struct MetricReport {
  MetricModel model;
  std::vector<HistoryRow> history;
  double integral_f = 0.0;
  double j_quadrature = 0.0;
  double j_std_error = 0.0;
  bool bound_holds = false;
  // max | |psi - phi| - f | over probe points.
  double max_pointwise_gap = 0.0;
};

// J(phi, psi) = integral of |phi - psi| over the domain, by quadrature of the
// explicit vector difference.
double metric_j(const MetricModel& model, const Box& domain, double tol, double* std_error = nullptr);

// Fits psi to the target by MSE and reports the bound check
// J <= epsilon (1 + 1e-3).
MetricReport metric_bound(const MetricProblem& problem, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Endpoint-constrained trajectories

using Vec3Var = std::array<Var, 3>;
// u = T(x, xdot, xddot), written over Var so objectives can differentiate it.
using InverseDynamics = std::function<Vec3Var(const Vec3Var& x, const Vec3Var& xd, const Vec3Var& xdd)>;

Vec3Var double_integrator(const Vec3Var& x, const Vec3Var& xd, const Vec3Var& xdd);

enum class TrajectoryObjective { energy, control, obstacle };

std::string to_string(TrajectoryObjective o);
TrajectoryObjective trajectory_objective_from_string(const std::string& name);

struct TrajectoryProblem {
  Eigen::Vector3d x0 = Eigen::Vector3d::Zero();
  Eigen::Vector3d xT = Eigen::Vector3d(1.0, 2.0, 3.0);
  double t0 = 0.0;
  double T = 1.0;
  std::vector<int> hidden{16};
  TrajectoryObjective objective = TrajectoryObjective::energy;
  int grid = 64;
  // Spherical obstacle used by the obstacle objective.
  Eigen::Vector3d obstacle_center = Eigen::Vector3d(0.5, 1.0, 1.5);
  double obstacle_radius = 0.5;
  double obstacle_weight = 100.0;
  InverseDynamics dynamics = double_integrator;
};

// x(t) = F(t) - F(t0) + x0 per axis, each F an equality-constrained plain
// network with epsilon_i = xT_i - x0_i over [t0, T].
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::array<ConstrainedModel, 3> axes, Eigen::Vector3d x0, double t0);

  const std::array<ConstrainedModel, 3>& axes() const { return axes_; }
  Eigen::Vector3d x(double t) const;
  Eigen::Vector3d xdot(double t) const;
  Eigen::Vector3d xddot(double t) const;
  Eigen::Vector3d control(double t, const InverseDynamics& dynamics) const;

 private:
  std::array<ConstrainedModel, 3> axes_;
  Eigen::Vector3d x0_ = Eigen::Vector3d::Zero();
  double t0_ = 0.0;
};

struct TrajectoryReport {
  Trajectory trajectory;
  std::vector<HistoryRow> history;
  std::vector<double> step_losses;
  // max over steps and axes of |x(T) - xT| after each update.
  double max_endpoint_residual = 0.0;
};

Trajectory make_trajectory(const TrajectoryProblem& problem, std::uint64_t seed);
TrajectoryReport trajectory_fit(const TrajectoryProblem& problem, const TrainConfig& cfg);
void write_trajectory_csv(const std::string& path, const Trajectory& traj, const TrajectoryProblem& problem,
                          int points);

// ---------------------------------------------------------------------------
// Soft Bellman values on a one-step toy MDP

struct SoftBellmanProblem {
  double beta = 10.0;
  Box state_box = Box::cube(1, -1.0, 1.0);
  Box action_box = Box::cube(1, -1.0, 1.0);
  // Reward -(a - g(s))^2.
  std::function<double(double)> g = [](double s) { return 0.5 * std::sin(3.0 * s); };
  std::vector<int> conditioner_hidden{32};
  std::vector<int> target_hidden{8};
  int eval_states = 5;
  int q_grid = 2001;
};

double toy_reward(const SoftBellmanProblem& p, double s, double a);

// V = (1/beta) log of the inclusion-exclusion integral of f over the action
// box. Throws NumericalError when that integral is <= 1e-300.
double soft_value(const Network& q_net, const Box& action_box, double beta);

struct ValueRow {
  double s = 0.0;
  double value = 0.0;
  double value_quadrature = 0.0;
  double integral = 0.0;
  double integral_quadrature = 0.0;
  double max_grid_q = 0.0;
};

struct SoftBellmanReport {
  HyperNetwork hypernet;
  std::vector<HistoryRow> history;
  std::vector<ValueRow> values;
};

SoftBellmanReport soft_bellman_demo(const SoftBellmanProblem& problem, const TrainConfig& cfg);
std::vector<ValueRow> soft_values(const HyperNetwork& h, const SoftBellmanProblem& problem);
void write_values_csv(const std::string& path, double beta, const std::vector<ValueRow>& rows);

}  // namespace finn
