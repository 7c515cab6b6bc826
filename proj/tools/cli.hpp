#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace npad::cli {

// Runs one command line (args exclude the program name). Results go to `out`
// unless --output names a file; diagnostics go to `err`. Returns the process
// exit status.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace npad::cli
