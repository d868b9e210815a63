#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace auxmat {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitIo = 2, kExitVerification = 3 };

/// Runs one subcommand. `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace auxmat
