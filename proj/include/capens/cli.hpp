#pragma once

#include "capens/error.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace capens {

/// Process exit codes; stable for scripting.
enum ExitCode : int {
    kExitOk = 0,
    kExitProvider = 2,
    kExitInvalidData = 3,
    kExitUsage = 64,
};

int exit_code_for(ErrorCode code);

/// Runs the command line (without the program name). Normal output goes to
/// `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace capens
