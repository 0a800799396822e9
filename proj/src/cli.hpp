#pragma once

#include <string>
#include <vector>

namespace actlang::cli {

// Runs one actlang invocation (arguments without the program name) and maps
// failures to exit codes: 0 ok, 1 usage, 2 bad data, 3 rerun mismatch,
// 4 internal error.
int run_main(const std::vector<std::string>& args);

}  // namespace actlang::cli
