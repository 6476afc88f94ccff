#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cpmdp::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kInfeasible = 2,
    kIo = 3,
    /// compare: the two solutions differ beyond the tolerance.
    kMismatch = 4,
};

/// Environment overrides read when the matching flag is absent.
inline constexpr const char* kDenseCapEnv = "CPMDP_DENSE_CAP";
inline constexpr const char* kThreadsEnv = "CPMDP_THREADS";

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cpmdp::cli
