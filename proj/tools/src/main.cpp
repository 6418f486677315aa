#include <iostream>

#include "losscost_tools/cli.hpp"

int main(int argc, char** argv) {
  return losscost::tools::run_cli(argc, argv, std::cout, std::cerr);
}
