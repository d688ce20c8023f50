#include "finn/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace finn {

namespace {

Tape* common_tape(const Var& a, const Var& b) {
  if (a.tape && b.tape && a.tape != b.tape)
    throw std::invalid_argument("Var operands recorded on different tapes");
  return a.tape ? a.tape : b.tape;
}

}  // namespace

Tape::Tape() { offsets_.push_back(0); }

Var Tape::push_node(double value) {
  Var v;
  v.tape = this;
  v.index = static_cast<std::uint32_t>(size());
  v.value = value;
  offsets_.push_back(static_cast<std::uint32_t>(parents_.size()));
  return v;
}

Var Tape::input(double value) { return push_node(value); }

Var Tape::record(double value, std::span<const Var> args,
                 std::span<const double> partials) {
  bool any = false;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i].is_constant()) continue;
    if (args[i].tape != this)
      throw std::invalid_argument("argument recorded on a different tape");
    parents_.push_back(args[i].index);
    partials_.push_back(partials[i]);
    any = true;
  }
  if (!any) return Var(value);
  return push_node(value);
}

Var Tape::record(double value, const Var& a, double da) {
  if (a.is_constant()) return Var(value);
  parents_.push_back(a.index);
  partials_.push_back(da);
  return push_node(value);
}

Var Tape::record(double value, const Var& a, double da, const Var& b,
                 double db) {
  bool any = false;
  if (!a.is_constant()) {
    parents_.push_back(a.index);
    partials_.push_back(da);
    any = true;
  }
  if (!b.is_constant()) {
    parents_.push_back(b.index);
    partials_.push_back(db);
    any = true;
  }
  if (!any) return Var(value);
  return push_node(value);
}

Var Tape::record_dot(double value, std::span<const Var> a,
                     std::span<const Var> b) {
  bool any = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_constant()) {
      parents_.push_back(a[i].index);
      partials_.push_back(b[i].value);
      any = true;
    }
    if (!b[i].is_constant()) {
      parents_.push_back(b[i].index);
      partials_.push_back(a[i].value);
      any = true;
    }
  }
  if (!any) return Var(value);
  return push_node(value);
}

Eigen::VectorXd Tape::gradient(const Var& output,
                               std::span<const Var> wrt) const {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(wrt.size()));
  for (const Var& w : wrt) {
    if (!w.is_constant() && w.tape != this)
      throw std::invalid_argument("gradient requested for a Var on another tape");
  }
  if (output.is_constant()) return grad;
  if (output.tape != this || output.index >= size())
    throw std::invalid_argument("output node is not on this tape");

  std::vector<double> adjoint(output.index + 1, 0.0);
  adjoint[output.index] = 1.0;
  for (std::size_t i = output.index + 1; i-- > 0;) {
    const double a = adjoint[i];
    if (a == 0.0) continue;
    for (std::uint32_t e = offsets_[i]; e < offsets_[i + 1]; ++e)
      adjoint[parents_[e]] += a * partials_[e];
  }
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    if (wrt[i].is_constant() || wrt[i].index > output.index) continue;
    grad[static_cast<Eigen::Index>(i)] = adjoint[wrt[i].index];
  }
  return grad;
}

void Tape::clear() {
  offsets_.assign(1, 0);
  parents_.clear();
  partials_.clear();
}

Var operator+(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  if (!t) return Var(a.value + b.value);
  return t->record(a.value + b.value, a, 1.0, b, 1.0);
}

Var operator-(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  if (!t) return Var(a.value - b.value);
  return t->record(a.value - b.value, a, 1.0, b, -1.0);
}

Var operator*(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  if (!t) return Var(a.value * b.value);
  return t->record(a.value * b.value, a, b.value, b, a.value);
}

Var operator/(const Var& a, const Var& b) {
  Tape* t = common_tape(a, b);
  const double q = a.value / b.value;
  if (!t) return Var(q);
  return t->record(q, a, 1.0 / b.value, b, -q / b.value);
}

Var operator-(const Var& a) {
  if (!a.tape) return Var(-a.value);
  return a.tape->record(-a.value, a, -1.0);
}

Var abs(const Var& a) {
  const double sign = a.value >= 0.0 ? 1.0 : -1.0;
  if (!a.tape) return Var(std::abs(a.value));
  return a.tape->record(std::abs(a.value), a, sign);
}

Var exp(const Var& a) {
  const double e = std::exp(a.value);
  if (!a.tape) return Var(e);
  return a.tape->record(e, a, e);
}

Var log(const Var& a) {
  if (!a.tape) return Var(std::log(a.value));
  return a.tape->record(std::log(a.value), a, 1.0 / a.value);
}

Var sqrt(const Var& a) {
  const double r = std::sqrt(a.value);
  if (!a.tape) return Var(r);
  return a.tape->record(r, a, 0.5 / r);
}

Var square(const Var& a) {
  if (!a.tape) return Var(a.value * a.value);
  return a.tape->record(a.value * a.value, a, 2.0 * a.value);
}

Var dot(std::span<const Var> a, std::span<const Var> b, double offset) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  Tape* t = nullptr;
  double acc = offset;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += a[i].value * b[i].value;
    Tape* ti = common_tape(a[i], b[i]);
    if (ti) {
      if (t && t != ti) throw std::invalid_argument("dot: mixed tapes");
      t = ti;
    }
  }
  if (!t) return Var(acc);
  return t->record_dot(acc, a, b);
}

Var sum(std::span<const Var> a) {
  Tape* t = nullptr;
  double acc = 0.0;
  for (const Var& v : a) {
    acc += v.value;
    if (v.tape) t = v.tape;
  }
  if (!t) return Var(acc);
  std::vector<double> ones(a.size(), 1.0);
  return t->record(acc, a, ones);
}

}  // namespace finn
