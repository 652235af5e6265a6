#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace klrisk::cli {

/// Runs one subcommand. `args` excludes the program name. The JSON report
/// goes to `out`, diagnostics to `err`. Returns 0 on success, 1 for usage
/// and input errors, 2 for numerical failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace klrisk::cli
