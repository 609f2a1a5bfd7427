#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace fprk {

/// Reads a whole file as bytes. Throws IoError naming the path.
std::string read_file(const std::filesystem::path& path);

/// Writes `bytes` to a sibling temp file, then renames it over `path`, so
/// readers never observe a partially written output.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace fprk
