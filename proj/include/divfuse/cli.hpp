#pragma once

#include <string>
#include <vector>

namespace divfuse {

// Dispatches a full command line (without argv[0]). Returns the process exit
// code: 0 success, 2 usage/config error, 3 data error, 4 numeric error.
int run_cli(const std::vector<std::string>& args);

}  // namespace divfuse
