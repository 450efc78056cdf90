#pragma once

#include <string>
#include <vector>

namespace serlab {

// CLI entry point: args without the program name. Returns the process exit
// code (0 success, 1 validation/runtime failure, 2 usage error).
int run_command(const std::vector<std::string>& args);

}  // namespace serlab
