#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mcpaudit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitDiffFound = 2;

// Entry point of the mcp-audit command; args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace mcpaudit
