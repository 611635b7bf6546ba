#pragma once

#include <iosfwd>

namespace brw {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitPass = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitResource = 3,
};

/// Entry point of the `brw` tool; human-readable output goes to `out`/`err`.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace brw
