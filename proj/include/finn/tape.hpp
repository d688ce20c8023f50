#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace finn {

class Tape;

// A scalar recorded on a reverse-mode tape. A Var with no tape is a constant;
// mixing constants and recorded values is allowed everywhere.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t index = 0;
  double value = 0.0;

  Var() = default;
  Var(double v) : value(v) {}  // NOLINT(google-explicit-constructor)

  bool is_constant() const { return tape == nullptr; }
};

// Append-only record of scalar operations. Each node stores its parents and
// the local partial derivative with respect to each parent, so nodes are
// topologically ordered by construction.
//
// One tape per thread; a tape must outlive every Var recorded on it.
class Tape {
 public:
  Tape();

  // Leaf node: a parameter slot or other independent input.
  Var input(double value);

  // Records `value` as a function of `args` with local partials `partials`.
  // Constant args are dropped. If every arg is constant the result is a
  // constant Var and nothing is recorded.
  Var record(double value, std::span<const Var> args,
             std::span<const double> partials);

  Var record(double value, const Var& a, double da);
  Var record(double value, const Var& a, double da, const Var& b, double db);

  // Node for sum_i a[i] * b[i] + offset, with `value` already computed.
  Var record_dot(double value, std::span<const Var> a, std::span<const Var> b);

  std::size_t size() const { return offsets_.size() - 1; }
  std::size_t edge_count() const { return parents_.size(); }

  // Exact adjoints d(output)/d(wrt[i]). Throws std::invalid_argument when
  // `output` or any element of `wrt` was recorded on another tape. A constant
  // output yields a zero gradient.
  Eigen::VectorXd gradient(const Var& output, std::span<const Var> wrt) const;

  void clear();

 private:
  Var push_node(double value);

  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> parents_;
  std::vector<double> partials_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }

// d|w|/dw at w = 0 is taken as +1.
Var abs(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);

// sum_i a[i] * b[i] + offset as a single node.
Var dot(std::span<const Var> a, std::span<const Var> b, double offset = 0.0);
// sum_i a[i] as a single node.
Var sum(std::span<const Var> a);

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value; }

inline double dot(std::span<const double> a, std::span<const double> b,
                  double offset = 0.0) {
  double acc = offset;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double sum(std::span<const double> a) {
  double acc = 0.0;
  for (double v : a) acc += v;
  return acc;
}

inline double square(double x) { return x * x; }

}  // namespace finn
