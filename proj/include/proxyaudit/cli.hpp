#pragma once

#include <iosfwd>

namespace proxyaudit {

/// Exit codes: 0 clean, 1 violations or flags found, 2 input error,
/// 3 numerical failure (non-convergence, separation).
enum ExitCode : int { kExitClean = 0, kExitFlagged = 1, kExitInput = 2, kExitNumerical = 3 };

/// Runs one `proxyaudit` invocation. Reports go to `out` unless --out is
/// given; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace proxyaudit
