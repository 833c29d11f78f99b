#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace depthprune::cli {

/// Runs one invocation. `args` excludes the program name. Returns the exit
/// status; failures write exactly one line "error: <Kind>: <message>" to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace depthprune::cli
