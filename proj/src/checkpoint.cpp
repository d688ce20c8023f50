#include "finn/checkpoint.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "finn/errors.hpp"
#include "io.hpp"

namespace finn {

using nlohmann::json;

namespace {

json hex_array(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(hex_double(v[i]));
  return a;
}

Eigen::VectorXd parse_hex_array(const json& a) {
  if (!a.is_array()) throw FormatError("expected an array of hex doubles");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_hex_double(a[i].get<std::string>());
  return v;
}

json architecture_json(const Architecture& arch) {
  json layers = json::array();
  for (const LayerSpec& l : arch.layers)
    layers.push_back({{"in", l.in_dim}, {"out", l.out_dim}, {"kind", to_string(l.kind)}});
  return {{"input_dim", arch.input_dim}, {"positive", arch.positive}, {"layers", layers}};
}

Architecture parse_architecture(const json& j, bool scalar_output) {
  Architecture arch;
  arch.input_dim = j.at("input_dim").get<int>();
  arch.positive = j.at("positive").get<bool>();
  for (const json& l : j.at("layers"))
    arch.layers.push_back({l.at("in").get<int>(), l.at("out").get<int>(),
                           layer_kind_from_string(l.at("kind").get<std::string>())});
  arch.validate(scalar_output);
  return arch;
}

Eigen::VectorXd parse_params(const json& j, const Architecture& arch) {
  Eigen::VectorXd p = parse_hex_array(j);
  if (static_cast<std::size_t>(p.size()) != arch.parameter_count())
    throw FormatError("parameter count does not match the stored architecture");
  return p;
}

json model_json(const NamedModel& m) {
  const Constraint& c = m.model.constraint;
  json domain = {{"lower", hex_array(c.domain.lower)}, {"upper", hex_array(c.domain.upper)}};
  return {{"name", m.name},
          {"architecture", architecture_json(m.model.net.architecture())},
          {"params", hex_array(m.model.net.parameters())},
          {"constraint", {{"kind", to_string(c.kind)}, {"epsilon", hex_double(c.epsilon)}, {"domain", domain}}}};
}

NamedModel parse_model(const json& j) {
  NamedModel m;
  m.name = j.at("name").get<std::string>();
  const Architecture arch = parse_architecture(j.at("architecture"), true);
  m.model.net = Network(arch, parse_params(j.at("params"), arch));
  const json& c = j.at("constraint");
  m.model.constraint.kind = constraint_kind_from_string(c.at("kind").get<std::string>());
  m.model.constraint.epsilon = parse_hex_double(c.at("epsilon").get<std::string>());
  Eigen::VectorXd lo = parse_hex_array(c.at("domain").at("lower"));
  Eigen::VectorXd hi = parse_hex_array(c.at("domain").at("upper"));
  if (lo.size() != hi.size()) throw FormatError("domain bounds differ in length");
  if (lo.size() > 0) m.model.constraint.domain = Box(std::move(lo), std::move(hi));
  m.model.validate();
  return m;
}

json hypernet_json(const NamedHypernet& h) {
  return {{"name", h.name},
          {"conditioner", architecture_json(h.hypernet.conditioner)},
          {"target", architecture_json(h.hypernet.target)},
          {"params", hex_array(h.hypernet.params)}};
}

NamedHypernet parse_hypernet(const json& j) {
  NamedHypernet h;
  h.name = j.at("name").get<std::string>();
  h.hypernet.conditioner = parse_architecture(j.at("conditioner"), false);
  h.hypernet.target = parse_architecture(j.at("target"), true);
  h.hypernet.params = parse_params(j.at("params"), h.hypernet.conditioner);
  h.hypernet.validate();
  return h;
}

}  // namespace

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_hex_double(const std::string& s) {
  if (s.empty()) throw FormatError("empty number");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) throw FormatError("bad number: " + s);
  return v;
}

const ConstrainedModel& Checkpoint::model(const std::string& name) const {
  for (const NamedModel& m : models)
    if (m.name == name) return m.model;
  throw FormatError("checkpoint has no model named " + name);
}

std::string checkpoint_to_string(const Checkpoint& c) {
  json models = json::array();
  for (const NamedModel& m : c.models) models.push_back(model_json(m));
  json hypers = json::array();
  for (const NamedHypernet& h : c.hypernetworks) hypers.push_back(hypernet_json(h));
  const json j = {{"format_version", kCheckpointVersion},
                  {"app", c.app},
                  {"seed", c.seed},
                  {"metadata", {{"steps", c.steps}, {"final_loss", hex_double(c.final_loss)}}},
                  {"models", models},
                  {"hypernetworks", hypers}};
  return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
  try {
    if (!j.is_object()) throw FormatError("malformed checkpoint: not an object");
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion)
      throw FormatError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint c;
    c.app = j.at("app").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.steps = j.at("metadata").at("steps").get<int>();
    c.final_loss = parse_hex_double(j.at("metadata").at("final_loss").get<std::string>());
    for (const json& m : j.at("models")) c.models.push_back(parse_model(m));
    for (const json& h : j.at("hypernetworks")) c.hypernetworks.push_back(parse_hypernet(h));
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid checkpoint: ") + e.what());
  }
}

void checkpoint_save(const Checkpoint& c, const std::string& path) { io::write_atomic(path, checkpoint_to_string(c)); }

Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path);
  std::stringstream text;
  text << in.rdbuf();
  return checkpoint_from_string(text.str());
}

}  // namespace finn
