#pragma once

#include <string>
#include <vector>

namespace brw::cli {

// Runs the brwlab command line (arguments without the program name).
// Exit codes: 0 success, 1 config error, 2 numerical failure,
// 3 particle-cap abort.
int run(std::vector<std::string> args);

}  // namespace brw::cli
