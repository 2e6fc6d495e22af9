#include <iostream>
#include <string>
#include <vector>

#include "ehrsum/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return ehrsum::cli::run(args, std::cout, std::cerr);
}
