#include "finn/training.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "finn/errors.hpp"
#include "io.hpp"

namespace finn {

Eigen::VectorXd uniform_point(const Box& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd x(box.dim());
  for (int i = 0; i < box.dim(); ++i) x[i] = box.lower[i] + unit(rng) * (box.upper[i] - box.lower[i]);
  return x;
}

namespace {

Box bounding_box(const std::vector<Sample>& samples) {
  Eigen::VectorXd lo = samples.front().x;
  Eigen::VectorXd hi = samples.front().x;
  for (const Sample& s : samples) {
    lo = lo.cwiseMin(s.x);
    hi = hi.cwiseMax(s.x);
  }
  // Keep the box non-degenerate for single points or flat coordinates.
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i])) hi[i] = lo[i] + 1.0;
  return Box(lo, hi);
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("train config: steps must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("train config: learning_rate must be >= 0");
  if (log_every < 1) throw std::invalid_argument("train config: log_every must be >= 1");
  if (optimizer == OptimizerKind::adam &&
      !(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && delta > 0.0))
    throw std::invalid_argument("train config: invalid Adam hyperparameters");
}

Optimizer::Optimizer(const TrainConfig& cfg, Eigen::Index size)
    : cfg_(cfg), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void Optimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (cfg_.optimizer == OptimizerKind::sgd) {
    params -= cfg_.learning_rate * grad;
    return;
  }
  ++t_;
  m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
  v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  params.array() -= cfg_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.delta);
}

Dataset Dataset::fixed(std::vector<Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("dataset: no samples");
  Dataset d;
  d.domain_ = bounding_box(samples);
  d.samples_ = std::move(samples);
  return d;
}

Dataset Dataset::generator(Target target, Box domain) {
  domain.validate();
  Dataset d;
  d.target_ = std::move(target);
  d.domain_ = std::move(domain);
  return d;
}

std::vector<Sample> Dataset::batch(std::size_t size, std::mt19937_64& rng) const {
  std::vector<Sample> out;
  out.reserve(size);
  if (target_) {
    for (std::size_t i = 0; i < size; ++i) {
      Eigen::VectorXd x = uniform_point(domain_, rng);
      const double y = target_(x);
      out.push_back({std::move(x), y});
    }
    return out;
  }
  if (size >= samples_.size()) return samples_;
  std::uniform_int_distribution<std::size_t> pick(0, samples_.size() - 1);
  for (std::size_t i = 0; i < size; ++i) out.push_back(samples_[pick(rng)]);
  return out;
}

Var mse_loss(const ConstrainedModel& model, std::span<const Var> theta, std::span<const Sample> batch) {
  if (batch.empty()) throw std::invalid_argument("mse_loss: empty batch");
  const Architecture& arch = model.net.architecture();
  const auto bound = bind_parameters<Var>(arch, theta);
  const Var s = scale_factor<Var>(model, bound);
  const Mask full = full_mask(arch.input_dim);
  std::vector<Var> residuals;
  residuals.reserve(batch.size());
  for (const Sample& sample : batch) {
    const Var f = s * evaluate<Var>(arch, bound, sample.x, full);
    residuals.push_back(Var(sample.y) - f);
  }
  return dot(std::span<const Var>(residuals), std::span<const Var>(residuals)) /
         Var(static_cast<double>(batch.size()));
}

LossAndGradient mse_loss(const ConstrainedModel& model, std::span<const Sample> batch) {
  model.validate();
  Tape tape;
  const std::vector<Var> theta = tape_inputs(tape, model.net.parameters());
  const Var loss = mse_loss(model, std::span<const Var>(theta), batch);
  return {loss.value, tape.gradient(loss, theta)};
}

void write_history_csv(const std::string& path, std::span<const HistoryRow> history) {
  std::ostringstream out;
  out << "step,loss,constraint_residual,min_f_probe\n";
  for (const HistoryRow& r : history)
    out << r.step << ',' << io::shortest(r.loss) << ',' << io::shortest(r.constraint_residual) << ','
        << io::shortest(r.min_f_probe) << '\n';
  io::write_atomic(path, out.str());
}

void minimize(Eigen::VectorXd& params, const Objective& objective, const TrainConfig& cfg,
              const StepObserver& observer) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  Optimizer opt(cfg, params.size());
  Tape tape;
  for (int step = 0; step < cfg.steps; ++step) {
    tape.clear();
    const std::vector<Var> theta = tape_inputs(tape, params);
    const Var loss = objective(tape, std::span<const Var>(theta), step, rng);
    const Eigen::VectorXd grad = tape.gradient(loss, theta);
    if (!std::isfinite(loss.value) || !grad.allFinite()) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << step << " (loss " << loss.value << ", parameter norm "
          << params.norm() << ")";
      throw NumericalError(msg.str());
    }
    opt.step(params, grad);
    if (observer) observer(step, params, loss.value);
  }
}

double min_f_probe(const ConstrainedModel& model, const Box& box, int count, std::uint64_t seed) {
  if (count <= 0) return 0.0;
  std::mt19937_64 rng(seed);
  const ModelEvaluator eval(model);
  double lowest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i) lowest = std::min(lowest, eval.f(uniform_point(box, rng)));
  return lowest;
}

TrainResult train_objective(ConstrainedModel model, const Objective& objective, const Box& probe_box,
                            const TrainConfig& cfg, const ModelObserver& observer) {
  model.validate();
  cfg.validate();
  TrainResult result;
  const std::uint64_t probe_seed = cfg.seed ^ 0x70be5eedULL;
  auto log_row = [&](int step, double loss) {
    result.history.push_back(
        {step, loss, constraint_residual(model), min_f_probe(model, probe_box, cfg.probe_points, probe_seed)});
  };
  Eigen::VectorXd params = model.net.parameters();
  minimize(params, objective, cfg, [&](int step, const Eigen::VectorXd& updated, double loss) {
    if (step % cfg.log_every == 0) log_row(step, loss);
    model.net.set_parameters(updated);
    if (observer) observer(step, model, loss);
  });
  // Final row: loss of the trained parameters on one more draw.
  Tape tape;
  std::mt19937_64 rng(cfg.seed + 1);
  const std::vector<Var> theta = tape_inputs(tape, model.net.parameters());
  const Var final_loss = objective(tape, std::span<const Var>(theta), cfg.steps, rng);
  log_row(cfg.steps, final_loss.value);
  result.model = std::move(model);
  return result;
}

TrainResult train(ConstrainedModel model, const Dataset& data, const TrainConfig& cfg,
                  const ModelObserver& observer) {
  const ConstrainedModel shape = model;
  Objective objective = [&](Tape&, std::span<const Var> theta, int, std::mt19937_64& rng) {
    const auto batch = data.batch(static_cast<std::size_t>(cfg.batch_size), rng);
    return mse_loss(shape, theta, std::span<const Sample>(batch));
  };
  const Box probe = model.constraint.kind != ConstraintKind::none ? model.constraint.domain : data.domain();
  return train_objective(std::move(model), objective, probe, cfg, observer);
}

}  // namespace finn
