#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cot3d {

// Writes to a sibling temp file and renames it over `path`, so readers never
// observe a partial file. Creates missing parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Throws DataError when the file is missing or unreadable.
std::string read_file(const std::filesystem::path& path);

}  // namespace cot3d
