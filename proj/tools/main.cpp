#include <vector>

#include "omiga/cli.hpp"

int main(int argc, char** argv) {
  return omiga::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
