#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace tipwise::fs {

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temp file and renames over `path`, so readers
/// see either the old or the new document, never a partial one.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace tipwise::fs
