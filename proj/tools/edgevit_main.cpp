#include <iostream>
#include <string>
#include <vector>

#include "edgevit/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return edgevit::cli::run(args, std::cout, std::cerr);
}
