#pragma once

#include <string>
#include <vector>

namespace srda::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one subcommand. args excludes the program name.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace srda::cli
