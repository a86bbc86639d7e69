#include <iostream>
#include <string>
#include <vector>

#include "sbash/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sbash::cli_main(args, std::cout, std::cerr);
}
