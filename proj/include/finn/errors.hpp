#pragma once

#include <stdexcept>
#include <string>

namespace finn {

// Raised when a computation hits a numerically degenerate state: a collapsed
// normaliser, a non-finite loss, a flat conditional CDF, and similar. The CLI
// maps it to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or incompatible files (checkpoints, config files).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace finn
