#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "layoutpnp/error.hpp"

namespace layoutpnp {

enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 1,
  kExitPipelineFailure = 2,
  kExitDiverged = 3,
};

int exit_code_for(ErrorCode code);

// Runs one command line (args[0] is the program name). Progress and reports
// go to `out`; failures are written to `err` as a one-line JSON record.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace layoutpnp
