#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qkdsync::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitPrecision = 3;

/// Runs the qkd_sync command line. `args` excludes the program name.
/// Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qkdsync::cli
