#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cxr::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitFile = 2;      // missing/unreadable input file or image
inline constexpr int kExitWeights = 3;   // malformed or mismatched weight file
inline constexpr int kExitData = 4;      // manifest problems, unreadable dataset image
inline constexpr int kExitConfig = 5;    // bad flags, config file, or parameter values

/// Runs the `cxr` command line. `args` excludes the program name. Reports go
/// to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cxr::cli
