#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace agcr::cli {

/// Runs one command line (args excludes the program name). Returns the
/// process exit code: 0 success, 1 failure, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace agcr::cli
