#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace brownent::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitRuntime = 3,
  kExitRecipeFailed = 4,
};

/// Runs the command line `args` (without the program name). Results go to
/// `out`, machine-readable error JSON to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace brownent::cli
