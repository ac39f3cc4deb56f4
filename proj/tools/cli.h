#ifndef SCD_TOOLS_CLI_H_
#define SCD_TOOLS_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace scd {

// Runs one command line (args[0] is the program name). Output goes to
// `out`, warnings and the one-line error to `err`. Returns the exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scd

#endif  // SCD_TOOLS_CLI_H_
