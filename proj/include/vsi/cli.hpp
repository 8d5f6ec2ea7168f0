#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vsi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBackend = 3;

/// Entry point shared by the `vsi` binary and the tests. `args` excludes the
/// program name. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vsi::cli
