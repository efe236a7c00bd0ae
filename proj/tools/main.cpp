#include <iostream>

#include "citedag/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return citedag::run_cli(args, std::cout, std::cerr);
}
