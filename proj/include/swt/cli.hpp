#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace swt::cli {

// Exit codes: 0 success, 1 runtime or data error, 2 usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Reads a flat key=value file (# comments, blank lines ignored) and appends
// `--key value` to `args` for every key not already given on the command
// line. Boolean flags use the values true/false.
std::vector<std::string> merge_config_file(const std::vector<std::string>& args);

}  // namespace swt::cli
