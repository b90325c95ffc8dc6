#pragma once

#include <string>
#include <vector>

namespace agecurves::cli {

/// Dispatch one command line (without the program name). Returns the process
/// exit code: 0 success, 1 bad input or flags, 2 numerical/runtime failure.
int run_cli(const std::vector<std::string>& args);

int run_cli(int argc, const char* const* argv);

} // namespace agecurves::cli
