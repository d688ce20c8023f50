#include "finn/network.hpp"

#include <cmath>
#include <random>

namespace finn {

bool is_monotone(LayerKind kind) {
  return kind == LayerKind::monotone_sigma_n || kind == LayerKind::monotone_affine;
}

Activation activation_of(LayerKind kind) {
  switch (kind) {
    case LayerKind::monotone_sigma_n:
      return Activation::sigma_n;
    case LayerKind::plain_tanh:
      return Activation::tanh;
    case LayerKind::monotone_affine:
    case LayerKind::plain_affine:
      return Activation::identity;
  }
  return Activation::identity;
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::monotone_sigma_n:
      return "monotone_sigma_n";
    case LayerKind::monotone_affine:
      return "monotone_affine";
    case LayerKind::plain_tanh:
      return "plain_tanh";
    case LayerKind::plain_affine:
      return "plain_affine";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (LayerKind k : {LayerKind::monotone_sigma_n, LayerKind::monotone_affine,
                      LayerKind::plain_tanh, LayerKind::plain_affine}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown layer kind: " + name);
}

Architecture Architecture::monotone(int input_dim, const std::vector<int>& hidden) {
  Architecture arch;
  arch.input_dim = input_dim;
  arch.positive = true;
  int in = input_dim;
  for (int width : hidden) {
    arch.layers.push_back({in, width, LayerKind::monotone_sigma_n});
    in = width;
  }
  arch.layers.push_back({in, 1, LayerKind::monotone_affine});
  arch.validate();
  return arch;
}

Architecture Architecture::plain(int input_dim, const std::vector<int>& hidden, int output_dim) {
  Architecture arch;
  arch.input_dim = input_dim;
  int in = input_dim;
  for (int width : hidden) {
    arch.layers.push_back({in, width, LayerKind::plain_tanh});
    in = width;
  }
  arch.layers.push_back({in, output_dim, LayerKind::plain_affine});
  arch.validate(output_dim == 1);
  return arch;
}

std::size_t Architecture::parameter_count() const {
  std::size_t count = 0;
  for (const LayerSpec& l : layers)
    count += static_cast<std::size_t>(l.in_dim) * static_cast<std::size_t>(l.out_dim) +
             static_cast<std::size_t>(l.out_dim);
  return count;
}

std::size_t Architecture::layer_offset(std::size_t layer) const {
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layer; ++l)
    offset += static_cast<std::size_t>(layers[l].in_dim) * static_cast<std::size_t>(layers[l].out_dim) +
              static_cast<std::size_t>(layers[l].out_dim);
  return offset;
}

void Architecture::validate(bool scalar_output) const {
  if (input_dim < 1) throw std::invalid_argument("architecture: input_dim must be positive");
  if (layers.empty()) throw std::invalid_argument("architecture: no layers");
  int in = input_dim;
  for (const LayerSpec& l : layers) {
    if (l.in_dim < 1 || l.out_dim < 1)
      throw std::invalid_argument("architecture: layer dimensions must be positive");
    if (l.in_dim != in)
      throw std::invalid_argument("architecture: dimension mismatch between consecutive layers");
    in = l.out_dim;
  }
  if (scalar_output && in != 1)
    throw std::invalid_argument("architecture: output dimension must be 1");
  if (positive) {
    for (const LayerSpec& l : layers)
      if (!is_monotone(l.kind))
        throw std::invalid_argument("architecture: positivity requires monotone layers");
  }
}

Network::Network(Architecture arch, Eigen::VectorXd params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  arch_.validate();
  if (static_cast<std::size_t>(params_.size()) != arch_.parameter_count())
    throw std::invalid_argument("network: parameter count does not match architecture");
}

void Network::set_parameters(const Eigen::VectorXd& params) {
  if (params.size() != params_.size())
    throw std::invalid_argument("network: parameter count mismatch");
  params_ = params;
}

Eigen::Map<const RowMatrixXd> Network::weights(std::size_t layer) const {
  const LayerSpec& l = arch_.layers.at(layer);
  return {params_.data() + arch_.layer_offset(layer), l.out_dim, l.in_dim};
}

Eigen::Map<const Eigen::VectorXd> Network::bias(std::size_t layer) const {
  const LayerSpec& l = arch_.layers.at(layer);
  return {params_.data() + arch_.layer_offset(layer) + static_cast<std::size_t>(l.in_dim * l.out_dim),
          l.out_dim};
}

Eigen::VectorXd init_parameters(const Architecture& arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::VectorXd params(static_cast<Eigen::Index>(arch.parameter_count()));
  Eigen::Index k = 0;
  for (const LayerSpec& l : arch.layers) {
    const double r = 1.0 / std::sqrt(static_cast<double>(l.in_dim));
    std::uniform_real_distribution<double> dist(-r, r);
    for (int i = 0; i < l.in_dim * l.out_dim + l.out_dim; ++i) params[k++] = dist(rng);
  }
  return params;
}

Network net_init(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  return Network(arch, init_parameters(arch, seed));
}

double net_F(const Network& net, const Eigen::VectorXd& x) { return net_partial(net, x, 0); }

double net_f(const Network& net, const Eigen::VectorXd& x) {
  return net_partial(net, x, full_mask(net.input_dim()));
}

double net_partial(const Network& net, const Eigen::VectorXd& x, Mask s) {
  return evaluate<double>(net.architecture(), net.bind(), x, s);
}

std::vector<Var> tape_inputs(Tape& tape, const Eigen::VectorXd& params) {
  std::vector<Var> vars;
  vars.reserve(static_cast<std::size_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i) vars.push_back(tape.input(params[i]));
  return vars;
}

ValueAndGradient net_grads(const Network& net, const Eigen::VectorXd& x, Mask s) {
  Tape tape;
  const std::vector<Var> theta = tape_inputs(tape, net.parameters());
  const auto bound = bind_parameters<Var>(net.architecture(), std::span<const Var>(theta));
  const Var out = evaluate<Var>(net.architecture(), bound, x, s);
  return {out.value, tape.gradient(out, theta)};
}

void HyperNetwork::validate() const {
  conditioner.validate(false);
  target.validate();
  if (static_cast<std::size_t>(conditioner.output_dim()) != target.parameter_count())
    throw std::invalid_argument("hypernetwork: conditioner output does not match target parameter count");
  if (static_cast<std::size_t>(params.size()) != conditioner.parameter_count())
    throw std::invalid_argument("hypernetwork: conditioner parameter count mismatch");
}

HyperNetwork hypernet_init(int state_dim, const std::vector<int>& hidden,
                           const Architecture& target, std::uint64_t seed) {
  HyperNetwork h;
  h.target = target;
  h.conditioner = Architecture::plain(state_dim, hidden, static_cast<int>(target.parameter_count()));
  h.params = init_parameters(h.conditioner, seed);
  const std::size_t last = h.conditioner.layers.size() - 1;
  const LayerSpec& out = h.conditioner.layers[last];
  const auto offset = static_cast<Eigen::Index>(h.conditioner.layer_offset(last));
  const Eigen::Index nw = static_cast<Eigen::Index>(out.in_dim) * out.out_dim;
  h.params.segment(offset, nw) *= 0.01;
  h.params.segment(offset + nw, out.out_dim) = init_parameters(target, seed ^ 0x9e3779b97f4a7c15ULL);
  h.validate();
  return h;
}

Network hypernet_apply(const HyperNetwork& h, const Eigen::VectorXd& s) {
  h.validate();
  const auto generated = hypernet_generate<double>(
      h, std::span<const double>(h.params.data(), static_cast<std::size_t>(h.params.size())), s);
  return Network(h.target, Eigen::Map<const Eigen::VectorXd>(generated.data(),
                                                               static_cast<Eigen::Index>(generated.size())));
}

}  // namespace finn
