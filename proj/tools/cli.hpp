#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hodge5::cli {

enum ExitCode : int {
    ok = 0,
    failure = 1,
    config_error = 2,
    numerical_error = 3,
    invariant_violation = 4,
};

/// Runs one `hodge5` invocation; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace hodge5::cli
