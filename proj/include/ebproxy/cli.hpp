#pragma once

#include <string>
#include <vector>

namespace ebproxy::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitDataError = 3;

/// Entry point behind the `ebproxy` binary. Subcommands: simulate, estimate,
/// risk-scan. Returns the process exit status instead of calling exit() so
/// tests can drive it in-process.
int run(const std::vector<std::string>& args);

}  // namespace ebproxy::cli
