#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace anchor::cli {

// Exit codes: 0 ok, 1 usage, 2 data/format, 3 runtime.
// `args` excludes the program name. Progress goes to `out`; failures are a
// single line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace anchor::cli
