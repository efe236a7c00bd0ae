#pragma once
// Command-line front end. Exit status: 0 on success, 1 on errors or leak
// violations, 2 on usage errors.

#include <ostream>
#include <string>
#include <vector>

namespace citedag {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace citedag
