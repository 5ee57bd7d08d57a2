#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace trustsim::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;   // bad flags, unreadable or invalid input
inline constexpr int kExitFinding = 2; // result diverges from the expected table

// Subcommands: check, simulate, report, replay, rerun. `args` excludes the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string tool_version();

} // namespace trustsim::cli
