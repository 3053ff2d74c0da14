#pragma once

#include <string>
#include <vector>

namespace nf::cli {

// Runs one subcommand. `args` excludes the program name. Exit codes:
// 0 success, 1 usage error, 2 data/validation error, 3 training error.
int run(const std::vector<std::string>& args);

}  // namespace nf::cli
