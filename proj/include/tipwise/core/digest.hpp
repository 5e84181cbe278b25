#pragma once

#include <string>
#include <string_view>

namespace tipwise {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Page identity used for loop detection. Pure function of (url, ax_tree);
/// length-prefixed so ("ab","c") and ("a","bc") never collide by framing.
std::string fingerprint(std::string_view url, std::string_view ax_tree);

}  // namespace tipwise
