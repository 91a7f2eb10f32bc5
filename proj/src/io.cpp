#include "elbert/io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "elbert/error.hpp"

namespace elbert {

void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer,
                  bool binary) {
  namespace fs = std::filesystem;
  fs::path dir = path.parent_path();
  if (!dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  try {
    std::ofstream os(tmp, binary ? std::ios::binary | std::ios::trunc
                                 : std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + tmp.string());
    writer(os);
    os.flush();
    if (!os) throw IoError("write failed: " + tmp.string());
  } catch (...) {
    std::error_code cleanup;
    fs::remove(tmp, cleanup);
    throw;
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  if (is.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

}  // namespace elbert
