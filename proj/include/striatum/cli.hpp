#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace striatum {

/// Run the `striatum` command line. `args` excludes the program name.
/// Returns 0 on success, 2 on usage or configuration errors, 1 on runtime failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace striatum
