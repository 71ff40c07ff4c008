#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace arnet::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs `arnet <command> [flags]`. `args` excludes the program name.
/// Commands: synth, train, eval, sweep. Every command echoes its resolved
/// configuration to <out>/resolved_config.txt before computing, and removes
/// whatever it wrote if it fails.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads a flat `key=value` file (`#` comments, blank lines ignored) and
/// turns it into `--key=value` flags, mapping underscores to dashes.
std::vector<std::string> config_file_to_flags(const std::string& path);

}  // namespace arnet::cli
