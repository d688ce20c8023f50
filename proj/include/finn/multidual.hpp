#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "finn/box.hpp"
#include "finn/tape.hpp"

#ifndef FINN_MAX_TRACKED_VARS
#define FINN_MAX_TRACKED_VARS 4
#endif

namespace finn {

inline constexpr int kMaxTrackedVars = FINN_MAX_TRACKED_VARS;
static_assert(kMaxTrackedVars >= 1 && kMaxTrackedVars <= 8);

inline int popcount(Mask m) { return std::popcount(m); }

// A set partition of a mask, stored as the list of its block masks.
using SetPartition = std::vector<Mask>;

// All set partitions of `s`, enumerated once for every mask below
// 2^kMaxTrackedVars on first use.
const std::vector<SetPartition>& set_partitions(Mask s);

// Truncated polynomial in n nilpotent infinitesimals (eps_i^2 = 0). The
// coefficient at mask S is the mixed partial d^|S| u / dx_S at the expansion
// point; the coefficient at the empty mask is the plain value.
template <class Scalar>
class MultiDual {
 public:
  static constexpr std::size_t kCapacity = std::size_t{1} << kMaxTrackedVars;

  MultiDual() { c_.fill(Scalar(0.0)); }

  explicit MultiDual(int num_vars, Scalar value = Scalar(0.0)) : n_(num_vars) {
    if (num_vars < 0 || num_vars > kMaxTrackedVars)
      throw std::invalid_argument("MultiDual: tracked variable count out of range");
    c_.fill(Scalar(0.0));
    c_[0] = value;
  }

  // Constant when var_index is empty, otherwise the seeded variable
  // x_{var_index} (1-based).
  static MultiDual lift(Scalar value, std::optional<int> var_index, int num_vars) {
    MultiDual out(num_vars, value);
    if (var_index) {
      if (*var_index < 1 || *var_index > num_vars)
        throw std::out_of_range("MultiDual::lift: variable index out of range");
      out.c_[Mask{1} << (*var_index - 1)] = Scalar(1.0);
    }
    return out;
  }

  int num_vars() const { return n_; }
  std::size_t size() const { return std::size_t{1} << n_; }
  Mask full_mask() const { return static_cast<Mask>(size() - 1); }

  const Scalar& value() const { return c_[0]; }
  const Scalar& operator[](Mask s) const { return c_[s]; }
  Scalar& operator[](Mask s) { return c_[s]; }

  std::span<const Scalar> coeffs() const { return {c_.data(), size()}; }

  MultiDual& operator+=(const MultiDual& o) {
    check_same(o);
    for (std::size_t s = 0; s < size(); ++s) c_[s] = c_[s] + o.c_[s];
    return *this;
  }
  MultiDual& operator-=(const MultiDual& o) {
    check_same(o);
    for (std::size_t s = 0; s < size(); ++s) c_[s] = c_[s] - o.c_[s];
    return *this;
  }
  MultiDual& operator*=(const Scalar& k) {
    for (std::size_t s = 0; s < size(); ++s) c_[s] = c_[s] * k;
    return *this;
  }

  friend MultiDual operator+(MultiDual a, const MultiDual& b) { return a += b; }
  friend MultiDual operator-(MultiDual a, const MultiDual& b) { return a -= b; }
  friend MultiDual operator*(MultiDual a, const Scalar& k) { return a *= k; }
  friend MultiDual operator*(const Scalar& k, MultiDual a) { return a *= k; }

  // Subset-convolution product: c_S(ab) = sum_{T subset S} c_T(a) c_{S\T}(b).
  friend MultiDual operator*(const MultiDual& a, const MultiDual& b) {
    a.check_same(b);
    MultiDual out(a.n_);
    for (Mask s = 0; s < a.size(); ++s) {
      Scalar acc = Scalar(0.0);
      for (Mask t = s;; t = (t - 1) & s) {
        acc = acc + a.c_[t] * b.c_[s & ~t];
        if (t == 0) break;
      }
      out.c_[s] = acc;
    }
    return out;
  }

  void check_same(const MultiDual& o) const {
    if (n_ != o.n_)
      throw std::invalid_argument("MultiDual: mismatched tracked variable counts");
  }

 private:
  int n_ = 0;
  std::array<Scalar, kCapacity> c_;
};

template <class Scalar>
MultiDual<Scalar> md_lift(Scalar value, std::optional<int> var_index, int num_vars) {
  return MultiDual<Scalar>::lift(value, var_index, num_vars);
}

template <class Scalar>
MultiDual<Scalar> md_mul(const MultiDual<Scalar>& a, const MultiDual<Scalar>& b) {
  return a * b;
}

template <class Scalar>
Scalar md_extract(const MultiDual<Scalar>& u, Mask s) {
  if (s >= u.size()) throw std::out_of_range("md_extract: mask outside tracked set");
  return u[s];
}

// Composition sigma(u) given derivs[k] = sigma^{(k)}(u.value()) for
// k = 0..n. Each coefficient is the Faa di Bruno sum over the set partitions
// of its mask: c_S = sum_P derivs[|P|] * prod_{B in P} c_B(u).
template <class Scalar>
MultiDual<Scalar> md_apply_unary(const MultiDual<Scalar>& u,
                                 std::span<const Scalar> derivs) {
  const int n = u.num_vars();
  if (derivs.size() < static_cast<std::size_t>(n) + 1)
    throw std::invalid_argument("md_apply_unary: need n + 1 derivatives");
  MultiDual<Scalar> out(n, derivs[0]);
  for (Mask s = 1; s < u.size(); ++s) {
    Scalar acc = Scalar(0.0);
    for (const SetPartition& p : set_partitions(s)) {
      Scalar term = derivs[p.size()];
      for (Mask block : p) term = term * u[block];
      acc = acc + term;
    }
    out[s] = acc;
  }
  return out;
}

}  // namespace finn
