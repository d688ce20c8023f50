#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "finn/apps.hpp"
#include "finn/errors.hpp"
#include "io.hpp"

namespace finn {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double axis_mass(double lo, double hi, double mu, double sigma) {
  return 0.5 * (std::erf((hi - mu) * kInvSqrt2 / sigma) - std::erf((lo - mu) * kInvSqrt2 / sigma));
}

}  // namespace

void GmmSpec::validate() const {
  box.validate();
  if (components.empty()) throw std::invalid_argument("gmm: no components");
  for (const GmmComponent& c : components) {
    if (c.mean.size() != box.dim() || c.sigma.size() != box.dim())
      throw std::invalid_argument("gmm: component dimension differs from the box");
    if (!(c.weight > 0.0)) throw std::invalid_argument("gmm: weights must be positive");
    if (!(c.sigma.minCoeff() > 0.0)) throw std::invalid_argument("gmm: sigmas must be positive");
  }
}

double GmmSpec::pdf(const Eigen::VectorXd& x) const {
  double total = 0.0;
  for (const GmmComponent& c : components) {
    double p = c.weight;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double z = (x[i] - c.mean[i]) / c.sigma[i];
      p *= kInvSqrt2Pi / c.sigma[i] * std::exp(-0.5 * z * z);
    }
    total += p;
  }
  return total;
}

double GmmSpec::mass(const Box& b) const {
  double total = 0.0;
  for (const GmmComponent& c : components) {
    double m = c.weight;
    for (int i = 0; i < b.dim(); ++i) m *= axis_mass(b.lower[i], b.upper[i], c.mean[i], c.sigma[i]);
    total += m;
  }
  return total;
}

double GmmSpec::normalised_cdf(double x) const {
  if (dim() != 1) throw std::invalid_argument("gmm: normalised_cdf needs a 1-D mixture");
  const double lo = box.lower[0];
  if (x <= lo) return 0.0;
  if (x >= box.upper[0]) return 1.0;
  double m = 0.0;
  for (const GmmComponent& c : components) m += c.weight * axis_mass(lo, x, c.mean[0], c.sigma[0]);
  return m / volume();
}

GmmSpec GmmSpec::with_volume(double v) const {
  GmmSpec out = *this;
  const double k = v / volume();
  for (GmmComponent& c : out.components) c.weight *= k;
  return out;
}

GmmSpec GmmSpec::two_mode_2d() {
  GmmSpec g;
  g.box = Box::cube(2, -3.0, 3.0);
  g.components = {{Eigen::Vector2d(-1.0, -0.8), Eigen::Vector2d(0.6, 0.5), 1.0},
                  {Eigen::Vector2d(1.1, 1.0), Eigen::Vector2d(0.5, 0.7), 1.0}};
  return g.with_volume(2.0);
}

GmmSpec GmmSpec::two_mode_1d() {
  GmmSpec g;
  g.box = Box::cube(1, -4.0, 4.0);
  g.components = {{Eigen::VectorXd::Constant(1, -1.5), Eigen::VectorXd::Constant(1, 0.5), 0.4},
                  {Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 0.8), 0.6}};
  return g.with_volume(1.0);
}

TrainResult fit_density(const Dataset& data, const Box& domain, const std::vector<int>& hidden,
                        double epsilon, const TrainConfig& cfg, const ModelObserver& observer) {
  ConstrainedModel model{net_init(Architecture::monotone(domain.dim(), hidden), cfg.seed),
                         {ConstraintKind::equality, epsilon, domain}};
  return train(std::move(model), data, cfg, observer);
}

namespace {

// Conditional CDF of dimension k with the prefix fixed. G_k is the partial
// over the prefix dims of the corner sum over the later dims; its values at
// the ends of the k-th side are computed once.
class ConditionalCdf {
 public:
  ConditionalCdf(const ModelEvaluator& eval, const Box& domain, const Eigen::VectorXd& prefix, int k)
      : eval_(eval), domain_(domain), k_(k), p_(domain.dim()) {
    if (k < 0 || k >= domain.dim()) throw std::invalid_argument("conditional_cdf: dimension out of range");
    p_.head(k) = prefix.head(k);
    ga_ = G(domain.lower[k]);
    denom_ = G(domain.upper[k]) - ga_;
    if (!(denom_ >= kFlatConditional)) throw NumericalError("degenerate density: flat conditional CDF");
  }

  double operator()(double xk) { return (G(xk) - ga_) / denom_; }

 private:
  double G(double t) {
    const int rest = domain_.dim() - k_ - 1;
    const Mask inner = static_cast<Mask>((1u << k_) - 1);
    p_[k_] = t;
    double acc = 0.0;
    for (Mask m = 0; m < (Mask{1} << rest); ++m) {
      int lower = 0;
      for (int j = 0; j < rest; ++j) {
        const bool up = (m >> j) & 1u;
        p_[k_ + 1 + j] = up ? domain_.upper[k_ + 1 + j] : domain_.lower[k_ + 1 + j];
        lower += up ? 0 : 1;
      }
      const double v = eval_.partial(p_, inner);
      acc += (lower & 1) ? -v : v;
    }
    return acc;
  }

  const ModelEvaluator& eval_;
  const Box& domain_;
  int k_;
  Eigen::VectorXd p_;
  double ga_ = 0.0;
  double denom_ = 0.0;
};

}  // namespace

double conditional_cdf(const ModelEvaluator& eval, const Box& domain, const Eigen::VectorXd& prefix, int k,
                       double xk) {
  return ConditionalCdf(eval, domain, prefix, k)(xk);
}

std::vector<Eigen::VectorXd> sample_density(const ConstrainedModel& model, int count, std::uint64_t seed) {
  model.validate();
  if (!model.net.positive() || model.constraint.kind != ConstraintKind::equality)
    throw std::invalid_argument("sample_density: needs a positivity model with an equality constraint");
  if (count < 0) throw std::invalid_argument("sample_density: negative count");
  const ModelEvaluator eval(model);
  const Box& domain = model.constraint.domain;
  const int n = domain.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd x = domain.lower;
    for (int k = 0; k < n; ++k) {
      ConditionalCdf cdf(eval, domain, x, k);
      const double t = unit(rng);
      double lo = domain.lower[k];
      double hi = domain.upper[k];
      double mid = 0.5 * (lo + hi);
      // C_k is nondecreasing in x_k, so bisection brackets the root.
      for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        const double c = cdf(mid);
        if (std::abs(c - t) <= kSampleTolerance) break;
        if (c < t)
          lo = mid;
        else
          hi = mid;
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid))) break;
      }
      x[k] = mid;
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<SurfaceRow> surface_grid(const ModelEvaluator& eval, const GmmSpec& spec, int points) {
  if (points < 2) throw std::invalid_argument("surface grid needs at least 2 points per axis");
  const Box& b = spec.box;
  std::vector<SurfaceRow> rows;
  auto coord = [&](int axis, int i) {
    return b.lower[axis] + (b.upper[axis] - b.lower[axis]) * static_cast<double>(i) / (points - 1);
  };
  if (spec.dim() == 1) {
    for (int i = 0; i < points; ++i) {
      const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, coord(0, i));
      rows.push_back({x[0], 0.0, eval.f(x), spec.pdf(x)});
    }
    return rows;
  }
  if (spec.dim() != 2) throw std::invalid_argument("surface grid supports 1-D and 2-D mixtures");
  for (int i = 0; i < points; ++i) {
    for (int j = 0; j < points; ++j) {
      const Eigen::Vector2d x(coord(0, i), coord(1, j));
      rows.push_back({x[0], x[1], eval.f(x), spec.pdf(x)});
    }
  }
  return rows;
}

double grid_mse(const std::vector<SurfaceRow>& rows) {
  if (rows.empty()) return 0.0;
  double acc = 0.0;
  for (const SurfaceRow& r : rows) acc += (r.f - r.truth) * (r.f - r.truth);
  return acc / static_cast<double>(rows.size());
}

std::vector<GmmRun> gmm_volume_experiment(const GmmSpec& spec, const std::vector<double>& eps_list,
                                          const TrainConfig& cfg, const GmmExperimentOptions& opt) {
  spec.validate();
  const Dataset data = Dataset::generator([&spec](const Eigen::VectorXd& x) { return spec.pdf(x); }, spec.box);
  std::vector<GmmRun> runs;
  for (double eps : eps_list) {
    GmmRun run;
    run.epsilon = eps;
    run.result = fit_density(data, spec.box, opt.hidden, eps, cfg);
    const ModelEvaluator eval(run.result.model);
    run.surface = surface_grid(eval, spec, opt.grid_points);
    run.grid_mse = grid_mse(run.surface);
    run.residual = constraint_residual(run.result.model);
    run.min_f = min_f_probe(run.result.model, spec.box, opt.probe_points, cfg.seed + 17);
    runs.push_back(std::move(run));
  }
  return runs;
}

void write_surface_csv(const std::string& path, const std::vector<SurfaceRow>& rows) {
  std::ostringstream out;
  out << "x,y,f,ground_truth\n";
  for (const SurfaceRow& r : rows)
    out << io::shortest(r.x) << ',' << io::shortest(r.y) << ',' << io::shortest(r.f) << ','
        << io::shortest(r.truth) << '\n';
  io::write_atomic(path, out.str());
}

void write_points_csv(const std::string& path, const std::vector<Eigen::VectorXd>& points) {
  std::ostringstream out;
  const Eigen::Index n = points.empty() ? 0 : points.front().size();
  for (Eigen::Index i = 0; i < n; ++i) out << (i ? "," : "") << 'x' << i + 1;
  out << '\n';
  for (const Eigen::VectorXd& p : points) {
    for (Eigen::Index i = 0; i < p.size(); ++i) out << (i ? "," : "") << io::shortest(p[i]);
    out << '\n';
  }
  io::write_atomic(path, out.str());
}

}  // namespace finn
