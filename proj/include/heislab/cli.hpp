#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace heislab {

/// Name of the environment variable holding the sweep worker count.
inline constexpr const char* kWorkersEnv = "HEISLAB_WORKERS";

/// Runs one command line (argv[0] is the program name). Returns the process
/// exit code: 0 success, 1 config, 2 solver, 3 infeasible decomposition.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace heislab
