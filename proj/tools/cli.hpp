#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace benford::cli {

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kRuntimeError = 2;

/// Runs the command line (args excludes the program name). Help and normal
/// output go to `out`; usage errors and diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Subcommand names in help order.
const std::vector<std::string>& subcommands();

/// Long flag names (with leading dashes) accepted by a subcommand, including
/// --help.
std::vector<std::string> flag_names(const std::string& subcommand);

/// The --help text of a subcommand.
std::string help_text(const std::string& subcommand);

}  // namespace benford::cli
