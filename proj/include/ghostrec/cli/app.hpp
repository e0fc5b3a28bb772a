#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ghostrec::cli {

// Runs one `ghostrec` invocation; args excludes the program name.
// Exit codes: 0 success, 1 domain or contract error, 2 usage or format error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ghostrec::cli
