#pragma once

namespace mid {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitAssertion = 3,
  kExitIo = 4,
};

/// Entry point of the `mid` command; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace mid
