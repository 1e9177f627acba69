#include <iostream>
#include <string>
#include <vector>

#include "layoutpnp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return layoutpnp::run_cli(args, std::cout, std::cerr);
}
