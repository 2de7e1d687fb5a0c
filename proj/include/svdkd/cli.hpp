#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace svdkd {

// Exit codes: 0 success, 1 a library contract failed, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace svdkd
