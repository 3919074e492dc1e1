#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace transfit::cli {

enum ExitCode { kSuccess = 0, kUsageError = 1, kNumericalFailure = 2 };

/// Runs one command line (args[0] is the subcommand, no program name).
/// Tables go to `out` unless --out names a file; diagnostics go to `err`
/// as single lines prefixed with "error:" or "warning:".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "ph", "po" or "alpha=<x>".
double parse_link(const std::string& text);

}  // namespace transfit::cli
