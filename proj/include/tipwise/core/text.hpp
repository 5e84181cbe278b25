#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tipwise::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool contains(std::string_view haystack, std::string_view needle);
bool starts_with(std::string_view s, std::string_view prefix);

/// Cuts `s` to at most `max_bytes` bytes without splitting a UTF-8 sequence.
std::string utf8_truncate(std::string_view s, std::size_t max_bytes);

/// Lowercased ASCII alphanumeric runs. Non-ASCII bytes act as separators.
std::vector<std::string> tokenize(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);

}  // namespace tipwise::text
