#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace monilog {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

/// Runs one subcommand (gen, replay, parse, calibrate, eval, detect, serve).
/// `args` excludes the program name. "-" as a path means stdin/stdout.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace monilog
