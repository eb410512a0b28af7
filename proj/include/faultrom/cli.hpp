#pragma once

#include <exception>
#include <string>
#include <vector>

namespace faultrom::cli {

/// 0 ok, 2 configuration, 3 numerical failure, 4 missing input, 1 anything else.
int exit_code(const std::exception& error);

/// Parse and execute one command line (argv[0] is the program name). Never
/// throws; failures are reported on stderr and mapped to an exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace faultrom::cli
