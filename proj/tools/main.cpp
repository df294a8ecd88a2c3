#include <iostream>

#include "ctskills/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ctskills::cli::run_cli(args, std::cout, std::cerr);
}
