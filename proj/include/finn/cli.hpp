#pragma once

#include <ostream>

namespace finn {

// Exit codes of the finn command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;
// `verify` ran but at least one check failed.
inline constexpr int kExitCheckFailed = 3;

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace finn
