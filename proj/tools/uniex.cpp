#include <iostream>
#include <string>
#include <vector>

#include "uniex/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return uniex::run_cli(args, std::cout, std::cerr);
}
