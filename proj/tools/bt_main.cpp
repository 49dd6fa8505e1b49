#include <iostream>
#include <string>
#include <vector>

#include "bt/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return bt::run_cli(args, std::cout, std::cerr);
}
