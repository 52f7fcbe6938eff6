#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ssmgrad::cli {

/// Runs one command. args excludes the program name.
/// Exit codes: 0 success (fit converged), 1 usage or input error, 2 fit did not converge.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ssmgrad::cli
