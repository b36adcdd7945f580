#include <iostream>

#include "tvcbf/cli.hpp"

int main(int argc, char** argv) {
  return tvcbf::cli::main(argc, argv, tvcbf::builtin_scenarios(), std::cout, std::cerr);
}
