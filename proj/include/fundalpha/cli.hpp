#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fundalpha {

/// Entry point of the `fundalpha` tool. Subcommands: synth, filter, fit,
/// simulate, report. Returns 0 on success, 2 on usage or configuration
/// errors, 1 on runtime failures.
int cli_main(int argc, char** argv);

/// Same, with explicit arguments (excluding the program name) and streams.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace fundalpha
