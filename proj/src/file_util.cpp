#include "swt/file_util.hpp"

#include <atomic>
#include <system_error>

#include "swt/error.hpp"

namespace swt {

namespace {
std::atomic<unsigned> temp_counter{0};
}

void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& writer, bool binary) {
  auto temp = path;
  temp += ".tmp" + std::to_string(temp_counter.fetch_add(1));
  try {
    {
      std::ofstream out(temp, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
      if (!out) throw Error("cannot open for writing: " + path.string());
      writer(out);
      out.flush();
      if (!out) throw Error("write failed: " + path.string());
    }
    std::filesystem::rename(temp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(temp, ec);
    throw;
  }
}

std::ifstream open_input(const std::filesystem::path& path, bool binary) {
  if (!std::filesystem::is_regular_file(path)) throw Error("input file not found: " + path.string());
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error("cannot open: " + path.string());
  return in;
}

}  // namespace swt
