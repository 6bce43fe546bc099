#pragma once

#include <string>
#include <vector>

namespace bppo {

// exit codes shared by the binary and the docs
inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;      // unclassified failure
inline constexpr int kExitUsage = 2;      // unknown flag / bad arguments
inline constexpr int kExitConfig = 3;     // invalid configuration
inline constexpr int kExitIo = 4;         // missing or corrupt file
inline constexpr int kExitThreshold = 5;  // analysis threshold exceeded
inline constexpr int kExitWarmup = 6;     // warmup missed its accuracy target
inline constexpr int kExitNumeric = 7;    // non-finite value encountered

// argv-style entry point used by the binary; errors print one line to stderr
// and map onto the exit codes above.
int cli_main(int argc, const char* const* argv);

// test helper: args without the program name
int cli_main(const std::vector<std::string>& args);

}  // namespace bppo
