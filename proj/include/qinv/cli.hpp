// Command-line front end.
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qinv {

/// Exit codes: 0 invariant found and verified, 1 unsafe, 2 timeout or
/// unknown, 3 input error. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qinv
