#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace patchgraph::cli {

/// Runs one subcommand. args excludes the program name. JSON results go to
/// out, diagnostics to err. Returns 0 on success, 1 on usage errors and 2 on
/// unknown flags or bad input data.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace patchgraph::cli
