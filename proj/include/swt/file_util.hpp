#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iosfwd>
#include <string>

namespace swt {

// Writes through a sibling temp file and renames it over `path` once the
// writer returns. On any exception the temp file is removed and `path` is
// left untouched.
void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& writer,
                      bool binary = false);

std::ifstream open_input(const std::filesystem::path& path, bool binary = false);

}  // namespace swt
