#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ppi::cli {

// Shared entry point for the binary and the tests. Returns the process exit
// code: 0 on success, 2 for usage or input errors, 3 when the data defeat the
// estimator (degenerate denominator, failed mechanism fit).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ppi::cli
