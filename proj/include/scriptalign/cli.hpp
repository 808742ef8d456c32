#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace scriptalign {

// Runs the command line (arguments exclude the program name). Returns 0 on
// success, 1 on runtime failure and 2 on usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scriptalign
