#pragma once

#include <string>
#include <vector>

namespace omiga::cli {

/// Dispatch a command line (without argv[0]). Exit codes: 0 success,
/// 1 validation error, 2 numeric failure.
int run(const std::vector<std::string>& args);

}  // namespace omiga::cli
