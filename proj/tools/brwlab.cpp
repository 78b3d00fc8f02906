#include "brw/cli.hpp"

int main(int argc, char** argv) {
  return brw::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
