#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "finn/integral.hpp"
#include "finn/network.hpp"

namespace finn {

inline constexpr int kCheckpointVersion = 1;

struct NamedModel {
  std::string name;
  ConstrainedModel model;
};

struct NamedHypernet {
  std::string name;
  HyperNetwork hypernet;
};

// Versioned JSON record of trained models. Every double is stored as a C99
// hex-float string, so save -> load -> save reproduces the file byte for byte.
struct Checkpoint {
  std::string app;
  std::uint64_t seed = 0;
  int steps = 0;
  double final_loss = 0.0;
  std::vector<NamedModel> models;
  std::vector<NamedHypernet> hypernetworks;

  const ConstrainedModel& model(const std::string& name) const;
};

std::string checkpoint_to_string(const Checkpoint& c);
// Throws FormatError on malformed text, an unknown version, or a parameter
// count that does not match the stored architecture.
Checkpoint checkpoint_from_string(const std::string& text);

void checkpoint_save(const Checkpoint& c, const std::string& path);
// Throws FormatError when the file is missing or unreadable.
Checkpoint checkpoint_load(const std::string& path);

std::string hex_double(double v);
double parse_hex_double(const std::string& s);

}  // namespace finn
