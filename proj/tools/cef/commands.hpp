#pragma once

#include <iosfwd>

namespace cef::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInternalError = 3 };

/// Parses `argv` and runs one subcommand. Human-readable logs go to `log`,
/// short summaries to `out`; machine-readable results are written under --out.
int runCli(int argc, const char* const* argv, std::ostream& out, std::ostream& log);

}  // namespace cef::cli
