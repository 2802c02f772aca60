#pragma once

#include <string>
#include <vector>

namespace wswm {

// Entry point shared by the binary and the tests.
// Exit codes: 0 success, 1 usage, 2 data/format problems, 3 numeric failure.
int cli_main(const std::vector<std::string>& args);

}  // namespace wswm
