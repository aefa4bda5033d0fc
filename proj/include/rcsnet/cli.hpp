#pragma once

#include <string>
#include <vector>

namespace rcsnet {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

// Entry point of the rcsnet command line. Subcommands: synth, topology,
// train, eval, predict, baseline. Messages go to stderr.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace rcsnet
