#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cctml::app {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kOk = 0,
    kInternal = 1,
    kInputError = 2,      // bad flags, files, schemas or contracts
    kTrainingError = 3,   // a learner or a submodel binding failed
    kNotConverged = 4,    // outputs written, but a LASSO or logit fit hit its iteration cap
};

/// Runs the tool on `args` (without the program name).
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace cctml::app
