#pragma once

namespace mir {

// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_runtime = 2, exit_check_failed = 3 };

int run_cli(int argc, char** argv);

}  // namespace mir
