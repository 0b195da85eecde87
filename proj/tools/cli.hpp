#pragma once

#include <iosfwd>

namespace crda::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;

/// Entry point of `crda-lab`. Machine-readable results go to `out`,
/// diagnostics and progress to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace crda::cli
