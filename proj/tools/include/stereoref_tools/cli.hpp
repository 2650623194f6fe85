#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stereoref::cli {

enum ExitCode : int {
  kOk = 0,
  kEnvironment = 1,        // I/O failure, port in use
  kInvalidInput = 2,       // bad flags, malformed or degenerate inputs
  kDataInconsistency = 3,  // inputs disagree with each other
};

// Parses argv (argv[0] is the program name) and runs the subcommand. Messages
// go to out, diagnostics to err. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Maps the current exception onto an exit code and prints it. Call only from
// a catch block.
int report_current_exception(std::ostream& err);

}  // namespace stereoref::cli
