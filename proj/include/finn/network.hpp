#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "finn/activation.hpp"
#include "finn/multidual.hpp"
#include "finn/tape.hpp"

namespace finn {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Monotone kinds apply |W| to the weights and leave the bias as is.
enum class LayerKind { monotone_sigma_n, monotone_affine, plain_tanh, plain_affine };

bool is_monotone(LayerKind kind);
Activation activation_of(LayerKind kind);
std::string to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct LayerSpec {
  int in_dim = 0;
  int out_dim = 0;
  LayerKind kind = LayerKind::plain_affine;

  bool operator==(const LayerSpec&) const = default;
};

// Layer stack. Parameters are stored flat, layer by layer: the row-major
// out_dim x in_dim weight matrix followed by the out_dim bias vector.
struct Architecture {
  int input_dim = 0;
  std::vector<LayerSpec> layers;
  // Every layer monotone, hidden activations sigma_n with n = input_dim.
  bool positive = false;

  // input -> hidden... -> 1 with monotone_sigma_n hidden layers and a
  // monotone_affine output layer.
  static Architecture monotone(int input_dim, const std::vector<int>& hidden);
  // input -> hidden... -> output_dim with tanh hidden layers.
  static Architecture plain(int input_dim, const std::vector<int>& hidden, int output_dim = 1);

  int output_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }
  // sigma_n is conditioned on the network input dimension.
  int activation_order() const { return input_dim; }
  std::size_t parameter_count() const;
  std::size_t layer_offset(std::size_t layer) const;

  // Throws std::invalid_argument on broken dimension chains, an output
  // dimension other than 1 when `scalar_output`, or a positivity flag on
  // non-monotone layers.
  void validate(bool scalar_output = true) const;

  bool operator==(const Architecture&) const = default;
};

// Effective per-layer parameters: |W| already applied for monotone layers.
template <class T>
struct BoundLayers {
  std::vector<std::vector<T>> weights;  // row-major, out_dim x in_dim
  std::vector<std::vector<T>> biases;
};

template <class T>
BoundLayers<T> bind_parameters(const Architecture& arch, std::span<const T> params) {
  if (params.size() != arch.parameter_count())
    throw std::invalid_argument("parameter count does not match architecture");
  using std::abs;
  BoundLayers<T> bound;
  std::size_t offset = 0;
  for (const LayerSpec& layer : arch.layers) {
    const std::size_t nw = static_cast<std::size_t>(layer.in_dim) * static_cast<std::size_t>(layer.out_dim);
    std::vector<T> w(params.begin() + offset, params.begin() + offset + nw);
    if (is_monotone(layer.kind))
      for (T& v : w) v = abs(v);
    offset += nw;
    bound.weights.push_back(std::move(w));
    bound.biases.emplace_back(params.begin() + offset, params.begin() + offset + layer.out_dim);
    offset += static_cast<std::size_t>(layer.out_dim);
  }
  return bound;
}

// Forward pass in MultiDual arithmetic. All inputs must track the same number
// of variables; the result has one entry per output unit.
template <class T>
std::vector<MultiDual<T>> forward(const Architecture& arch, const BoundLayers<T>& bound,
                                  std::vector<MultiDual<T>> h) {
  if (h.size() != static_cast<std::size_t>(arch.input_dim))
    throw std::invalid_argument("input dimension mismatch");
  const int nvars = h.empty() ? 0 : h.front().num_vars();
  std::vector<T> gathered;
  std::vector<T> derivs(static_cast<std::size_t>(nvars) + 1);
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    const LayerSpec& layer = arch.layers[l];
    const auto& w = bound.weights[l];
    const auto& b = bound.biases[l];
    const std::size_t in = static_cast<std::size_t>(layer.in_dim);
    std::vector<MultiDual<T>> next(static_cast<std::size_t>(layer.out_dim), MultiDual<T>(nvars));
    gathered.resize(in);
    for (Mask s = 0; s < (Mask{1} << nvars); ++s) {
      for (std::size_t i = 0; i < in; ++i) gathered[i] = h[i][s];
      for (std::size_t j = 0; j < next.size(); ++j) {
        std::span<const T> row(w.data() + j * in, in);
        T acc = dot(row, std::span<const T>(gathered));
        next[j][s] = s == 0 ? acc + b[j] : acc;
      }
    }
    const Activation act = activation_of(layer.kind);
    if (act != Activation::identity) {
      for (auto& unit : next) {
        activation_derivatives(act, arch.activation_order(), unit.value(), std::span<T>(derivs));
        unit = md_apply_unary(unit, std::span<const T>(derivs));
      }
    }
    h = std::move(next);
  }
  return h;
}

// Mixed partial of a scalar-output network over the input dims in `s`
// (bit i is input i + 1). s = 0 gives F, the full mask gives f.
template <class T>
T evaluate(const Architecture& arch, const BoundLayers<T>& bound,
           const Eigen::Ref<const Eigen::VectorXd>& x, Mask s) {
  if (x.size() != arch.input_dim) throw std::invalid_argument("point dimension mismatch");
  if (arch.input_dim < 32 && s >= (Mask{1} << arch.input_dim))
    throw std::invalid_argument("derivative subset outside the input dimensions");
  const int nvars = popcount(s);
  if (nvars > kMaxTrackedVars)
    throw std::invalid_argument("too many differentiated inputs for MultiDual");
  std::vector<MultiDual<T>> inputs;
  inputs.reserve(static_cast<std::size_t>(arch.input_dim));
  int var = 0;
  for (int i = 0; i < arch.input_dim; ++i) {
    std::optional<int> seed;
    if (s & (Mask{1} << i)) seed = ++var;
    inputs.push_back(MultiDual<T>::lift(T(x[i]), seed, nvars));
  }
  const auto out = forward(arch, bound, std::move(inputs));
  return out.front()[static_cast<Mask>((std::size_t{1} << nvars) - 1)];
}

// Plain vector-valued forward pass (no derivatives).
template <class T>
std::vector<T> forward_values(const Architecture& arch, const BoundLayers<T>& bound,
                              std::span<const T> x) {
  std::vector<MultiDual<T>> inputs;
  for (const T& v : x) inputs.push_back(MultiDual<T>(0, v));
  const auto out = forward(arch, bound, std::move(inputs));
  std::vector<T> values;
  values.reserve(out.size());
  for (const auto& u : out) values.push_back(u.value());
  return values;
}

// Scalar-output network parametrising the antiderivative F'.
class Network {
 public:
  Network() = default;
  Network(Architecture arch, Eigen::VectorXd params);

  const Architecture& architecture() const { return arch_; }
  int input_dim() const { return arch_.input_dim; }
  bool positive() const { return arch_.positive; }

  const Eigen::VectorXd& parameters() const { return params_; }
  void set_parameters(const Eigen::VectorXd& params);
  std::span<const double> parameter_span() const {
    return {params_.data(), static_cast<std::size_t>(params_.size())};
  }

  // Raw (signed) weights of a layer as a matrix view.
  Eigen::Map<const RowMatrixXd> weights(std::size_t layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  BoundLayers<double> bind() const { return bind_parameters<double>(arch_, parameter_span()); }

 private:
  Architecture arch_;
  Eigen::VectorXd params_;
};

// Uniform init in [-r, r], r = 1 / sqrt(in_dim), from a 64-bit Mersenne
// twister seeded with `seed`.
Network net_init(const Architecture& arch, std::uint64_t seed);
Eigen::VectorXd init_parameters(const Architecture& arch, std::uint64_t seed);

double net_F(const Network& net, const Eigen::VectorXd& x);
double net_f(const Network& net, const Eigen::VectorXd& x);
double net_partial(const Network& net, const Eigen::VectorXd& x, Mask s);

inline Mask full_mask(int dim) { return static_cast<Mask>((std::size_t{1} << dim) - 1); }

struct ValueAndGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

// Value of the mixed partial over `s` plus its exact gradient with respect to
// every raw parameter.
ValueAndGradient net_grads(const Network& net, const Eigen::VectorXd& x, Mask s);

// Registers every entry of `params` as a tape input.
std::vector<Var> tape_inputs(Tape& tape, const Eigen::VectorXd& params);

// State-conditioned generator of a monotone network over actions: a plain
// conditioner maps s to the flat parameter vector of `target`.
struct HyperNetwork {
  Architecture conditioner;
  Eigen::VectorXd params;
  Architecture target;

  // Throws std::invalid_argument when the conditioner output does not match
  // the target's parameter count.
  void validate() const;
};

// Conditioner init follows net_init, except the output layer: its weights are
// scaled by 0.01 and its bias is a net_init draw of the target, so every
// state starts near one ordinary target network.
HyperNetwork hypernet_init(int state_dim, const std::vector<int>& hidden,
                           const Architecture& target, std::uint64_t seed);

template <class T>
std::vector<T> hypernet_generate(const HyperNetwork& h, std::span<const T> conditioner_params,
                                 const Eigen::VectorXd& s) {
  if (s.size() != h.conditioner.input_dim)
    throw std::invalid_argument("state dimension mismatch");
  const auto bound = bind_parameters<T>(h.conditioner, conditioner_params);
  std::vector<T> state;
  for (Eigen::Index i = 0; i < s.size(); ++i) state.push_back(T(s[i]));
  return forward_values(h.conditioner, bound, std::span<const T>(state));
}

Network hypernet_apply(const HyperNetwork& h, const Eigen::VectorXd& s);

}  // namespace finn
