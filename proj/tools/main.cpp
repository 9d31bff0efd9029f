#include <iostream>
#include <string>
#include <vector>

#include "scalematch/cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return scalematch::cli::run(args, std::cout, std::cerr);
}
