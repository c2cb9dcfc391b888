#include <iostream>
#include <string>
#include <vector>

#include "heislab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return heislab::run_cli(args, std::cout, std::cerr);
}
