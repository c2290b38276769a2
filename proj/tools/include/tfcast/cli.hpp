#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tfcast::cli {

/// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // data, numeric or gradient-check failure
inline constexpr int kExitUsage = 2;

/// Environment variable naming a config file when --config is absent.
inline constexpr const char* kConfigEnv = "TFCAST_CONFIG";

/// Runs `tfcast <args...>` (args excludes the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tfcast::cli
