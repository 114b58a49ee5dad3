#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tvstarma {

enum ExitCode { kExitOk = 0, kExitFailure = 1, kExitValidation = 2, kExitNumerical = 3 };

/// Runs the tvstarma command line; args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tvstarma
