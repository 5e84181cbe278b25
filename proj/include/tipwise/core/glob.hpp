#pragma once

#include <cstddef>
#include <string_view>

namespace tipwise {

/// Full-string glob match: `*` any span (including empty), `?` exactly one
/// byte, `\` makes the next byte literal. A trailing lone `\` matches a
/// literal backslash. Linear time, no recursion.
bool glob_match(std::string_view pattern, std::string_view text);

/// False for patterns with a dangling escape or no content.
bool glob_is_valid(std::string_view pattern);

/// Number of literal (non-wildcard) bytes; used as a specificity score.
std::size_t glob_literal_count(std::string_view pattern);

}  // namespace tipwise
