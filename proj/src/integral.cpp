#include "finn/integral.hpp"

namespace finn {

std::string to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::none:
      return "none";
    case ConstraintKind::equality:
      return "equality";
    case ConstraintKind::inequality:
      return "inequality";
  }
  return "unknown";
}

ConstraintKind constraint_kind_from_string(const std::string& name) {
  if (name == "none") return ConstraintKind::none;
  if (name == "equality") return ConstraintKind::equality;
  if (name == "inequality") return ConstraintKind::inequality;
  throw std::invalid_argument("unknown constraint kind: " + name);
}

void ConstrainedModel::validate() const {
  if (constraint.kind == ConstraintKind::none) return;
  constraint.domain.validate();
  if (constraint.domain.dim() != net.input_dim())
    throw std::invalid_argument("constraint domain dimension differs from network input dimension");
  if (constraint.kind == ConstraintKind::inequality) {
    if (!(constraint.epsilon > 0.0))
      throw std::invalid_argument("inequality constraint requires epsilon > 0");
    if (!net.positive())
      throw std::invalid_argument("inequality constraint requires a positivity network");
  }
}

double box_integral(const Network& net, const Box& box) {
  return box_integral<double>(net.architecture(), net.bind(), box);
}

double scale_factor(const ConstrainedModel& model) {
  model.validate();
  return scale_factor<double>(model, model.net.bind());
}

double eval_f(const ConstrainedModel& model, const Eigen::VectorXd& x) {
  return scale_factor(model) * net_f(model.net, x);
}

double eval_F(const ConstrainedModel& model, const Eigen::VectorXd& x) {
  return scale_factor(model) * net_F(model.net, x);
}

ValueAndGradient eval_f_grads(const ConstrainedModel& model, const Eigen::VectorXd& x) {
  model.validate();
  Tape tape;
  const std::vector<Var> theta = tape_inputs(tape, model.net.parameters());
  const auto bound = bind_parameters<Var>(model.net.architecture(), std::span<const Var>(theta));
  const Var s = scale_factor<Var>(model, bound);
  const Var f = evaluate<Var>(model.net.architecture(), bound, x, full_mask(model.net.input_dim()));
  const Var out = s * f;
  return {out.value, tape.gradient(out, theta)};
}

double constrained_integral(const ConstrainedModel& model) {
  return scale_factor(model) * box_integral(model.net, model.constraint.domain);
}

double constraint_residual(const ConstrainedModel& model) {
  switch (model.constraint.kind) {
    case ConstraintKind::none:
      return 0.0;
    case ConstraintKind::equality:
      return std::abs(constrained_integral(model) - model.constraint.epsilon);
    case ConstraintKind::inequality:
      return std::max(0.0, constrained_integral(model) - model.constraint.epsilon);
  }
  return 0.0;
}

ModelEvaluator::ModelEvaluator(const ConstrainedModel& model)
    : arch_(model.net.architecture()), bound_(model.net.bind()) {
  model.validate();
  scale_ = scale_factor<double>(model, bound_);
}

double ModelEvaluator::f(const Eigen::VectorXd& x) const {
  return scale_ * evaluate<double>(arch_, bound_, x, full_mask(arch_.input_dim));
}

double ModelEvaluator::F(const Eigen::VectorXd& x) const {
  return scale_ * evaluate<double>(arch_, bound_, x, 0);
}

double ModelEvaluator::partial(const Eigen::VectorXd& x, Mask s) const {
  return scale_ * evaluate<double>(arch_, bound_, x, s);
}

double ModelEvaluator::integral(const Box& box) const {
  return scale_ * box_integral<double>(arch_, bound_, box);
}

}  // namespace finn
