#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace endnet {

// Process exit statuses of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitIo = 1,
    kExitConfig = 2,
    kExitDivergence = 3,
    kExitGradCheck = 4,
};

// Runs the command-line tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace endnet
