#include <iostream>

#include "hotspots/cli/cli.h"

int main(int argc, char** argv) {
  return hotspots::cli::Run({argv + 1, argv + argc}, std::cout, std::cerr);
}
