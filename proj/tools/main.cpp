#include <iostream>

#include "auxmat/cli.hpp"

int main(int argc, char** argv) {
  return auxmat::dispatch(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
