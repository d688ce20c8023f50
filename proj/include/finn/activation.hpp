#pragma once

#include <span>
#include <vector>

#include "finn/tape.hpp"

namespace finn {

// Closed forms for the iterated antiderivatives of Phi(x) = (erf(x) + 1) / 2
// that vanish at -infinity:
//
//   I_k(x) = p_k(x) Phi(x) + q_k(x) g(x),   g(x) = exp(-x^2) / sqrt(pi).
//
// I_0 = Phi, I_{-1} = g, and I_{-2} = g' = -2x g is kept so that the
// derivative of every tabulated order is itself tabulated. The activation
// sigma_n of an n-input monotone network is I_{n-1}, and its j-th derivative
// is I_{n-1-j}.
class IterErfTable {
 public:
  static constexpr int kMinOrder = -2;
  // Largest order whose rational coefficients stay within 64-bit range.
  static constexpr int kMaxSupportedOrder = 16;

  explicit IterErfTable(int max_k);

  int max_k() const { return max_k_; }

  // Ascending polynomial coefficients of p_k and q_k.
  const std::vector<double>& p(int k) const;
  const std::vector<double>& q(int k) const;

  // I_k(x) for kMinOrder <= k <= max_k.
  double eval(int k, double x) const;

  // [sigma_n(x), sigma_n'(x), ..., sigma_n^{(max_order)}(x)] with
  // 0 <= max_order <= n.
  std::vector<double> sigma_derivs(int n, double x, int max_order) const;

 private:
  void check_order(int k) const;

  int max_k_;
  std::vector<std::vector<double>> p_;
  std::vector<std::vector<double>> q_;
};

IterErfTable build_table(int max_k);

// Process-wide table with max_k = 8, built on first use.
const IterErfTable& shared_erf_table();

inline double act_eval(const IterErfTable& table, int k, double x) {
  return table.eval(k, x);
}

inline std::vector<double> act_derivs(const IterErfTable& table, int n, double x,
                                      int max_order) {
  return table.sigma_derivs(n, x, max_order);
}

// Elementwise nonlinearities a layer can apply.
enum class Activation { identity, sigma_n, tanh };

// k-th derivative of the activation at x. For sigma_n, `order_n` selects the
// family member; it is ignored otherwise.
double activation_derivative(Activation act, int order_n, int k, double x);

// Fills out[k] = act^{(k)}(x) for k < out.size(). The Var overload records
// each entry as a function of x using derivative k + 1.
void activation_derivatives(Activation act, int order_n, double x,
                            std::span<double> out);
void activation_derivatives(Activation act, int order_n, const Var& x,
                            std::span<Var> out);

}  // namespace finn
