#pragma once

#include <filesystem>
#include <functional>
#include <string>

namespace elbert {

/// Writes a file atomically: the payload goes to a temp file in the target
/// directory which is renamed into place, so readers never see a partial file.
/// The writer callback receives the temp file's ostream.
void atomic_write(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer,
                  bool binary = false);

/// Reads a whole file into a string; throws IoError if unreadable.
std::string read_file(const std::filesystem::path& path);

}  // namespace elbert
