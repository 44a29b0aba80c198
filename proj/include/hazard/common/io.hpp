#pragma once

#include <filesystem>
#include <string>

namespace hazard {

std::string read_file(const std::filesystem::path& path);
// Writes via a sibling temp file and rename so readers never see partial content.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace hazard
