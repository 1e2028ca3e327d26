#include <iostream>
#include <string>
#include <vector>

#include "combidose/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return combidose::run_cli(args, std::cout, std::cerr);
}
