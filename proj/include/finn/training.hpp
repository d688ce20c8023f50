#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "finn/integral.hpp"
#include "finn/tape.hpp"

namespace finn {

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
  int steps = 2000;
  int batch_size = 128;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double delta = 1e-8;
  std::uint64_t seed = 0;
  int log_every = 100;
  int probe_points = 256;

  // steps, batch_size >= 1 and learning_rate >= 0; throws std::invalid_argument.
  void validate() const;
};

// First-order update rule over a flat parameter vector.
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& cfg, Eigen::Index size);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  TrainConfig cfg_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long t_ = 0;
};

struct Sample {
  Eigen::VectorXd x;
  double y = 0.0;
};

// Either a stored set of pairs or a ground-truth function sampled uniformly
// over a box on every batch.
class Dataset {
 public:
  using Target = std::function<double(const Eigen::VectorXd&)>;

  static Dataset fixed(std::vector<Sample> samples);
  static Dataset generator(Target target, Box domain);

  bool is_generator() const { return static_cast<bool>(target_); }
  const std::vector<Sample>& samples() const { return samples_; }
  // Domain of the generator, or the bounding box of the stored points.
  const Box& domain() const { return domain_; }

  // Generators draw fresh points; fixed sets return every pair when
  // `size` covers the set and a uniform draw with replacement otherwise.
  std::vector<Sample> batch(std::size_t size, std::mt19937_64& rng) const;

 private:
  std::vector<Sample> samples_;
  Target target_;
  Box domain_;
};

struct LossAndGradient {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

// Mean of (y - eval_f(x))^2 and its gradient, including the scale path.
// Throws std::invalid_argument on an empty batch.
LossAndGradient mse_loss(const ConstrainedModel& model, std::span<const Sample> batch);

// Records the MSE loss of `model` with parameters `theta` on `tape`.
Var mse_loss(const ConstrainedModel& model, std::span<const Var> theta, std::span<const Sample> batch);

struct HistoryRow {
  int step = 0;
  double loss = 0.0;
  double constraint_residual = 0.0;
  double min_f_probe = 0.0;
};

void write_history_csv(const std::string& path, std::span<const HistoryRow> history);

// Scalar objective recorded on a tape as a function of the parameters.
using Objective =
    std::function<Var(Tape& tape, std::span<const Var> params, int step, std::mt19937_64& rng)>;
// Called after every parameter update with the loss measured before it.
using StepObserver = std::function<void(int step, const Eigen::VectorXd& params, double loss)>;

// Runs cfg.steps optimiser steps on `params`. Throws NumericalError on a
// non-finite loss or gradient, reporting the step and parameter norm.
void minimize(Eigen::VectorXd& params, const Objective& objective, const TrainConfig& cfg,
              const StepObserver& observer = {});

struct TrainResult {
  ConstrainedModel model;
  std::vector<HistoryRow> history;
};

using ModelObserver = std::function<void(int step, const ConstrainedModel& model, double loss)>;

// Fits `model` to `data` with the MSE on f. History rows are logged every
// cfg.log_every steps plus one for the final parameters.
TrainResult train(ConstrainedModel model, const Dataset& data, const TrainConfig& cfg,
                  const ModelObserver& observer = {});

// Same, with a custom objective in place of the MSE. `probe_box` supplies the
// points for the min_f_probe column.
TrainResult train_objective(ConstrainedModel model, const Objective& objective, const Box& probe_box,
                            const TrainConfig& cfg, const ModelObserver& observer = {});

Eigen::VectorXd uniform_point(const Box& box, std::mt19937_64& rng);

// Minimum of eval_f over `count` uniform points of `box` drawn from `seed`.
double min_f_probe(const ConstrainedModel& model, const Box& box, int count, std::uint64_t seed);

}  // namespace finn
