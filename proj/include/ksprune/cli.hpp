#pragma once

#include <string>
#include <vector>

namespace ksprune {

/// Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace ksprune
