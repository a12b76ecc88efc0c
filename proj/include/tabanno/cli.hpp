#pragma once

#include <string>
#include <vector>

namespace tabanno::cli {

// Entry point behind the binary. Exit codes: 0 success, 1 runtime failure,
// 2 unknown flags / parse errors, 3 configuration violations.
int run(const std::vector<std::string>& args);

}  // namespace tabanno::cli
