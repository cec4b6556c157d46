#include <iostream>
#include <string>
#include <vector>

#include "ptransr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ptransr::cli::Run(args, std::cout, std::cerr);
}
