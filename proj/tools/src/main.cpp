#include <iostream>
#include <string>
#include <vector>

#include "stereoref_tools/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return stereoref::cli::run(args, std::cout, std::cerr);
}
