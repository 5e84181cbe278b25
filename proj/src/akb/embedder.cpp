#include "tipwise/akb/embedder.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>

#include "tipwise/core/digest.hpp"
#include "tipwise/core/text.hpp"

namespace tipwise {

std::vector<double> TrigramEmbedder::embed(std::string_view input) const {
    std::vector<double> v(dim_, 0.0);
    const std::string s = text::to_lower(input);
    if (s.size() < 3) return v;
    for (std::size_t i = 0; i + 3 <= s.size(); ++i) {
        std::uint32_t h = 2166136261u;
        for (std::size_t k = 0; k < 3; ++k) {
            h ^= static_cast<unsigned char>(s[i + k]);
            h *= 16777619u;
        }
        v[h % dim_] += 1.0;
    }
    return v;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) return 0.0;
    double dot = 0.0;
    double na = 0.0;
    double nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string embedding_digest(std::span<const double> v) {
    std::string buf;
    char tmp[32];
    for (double x : v) {
        auto res = std::to_chars(tmp, tmp + sizeof tmp, x);
        buf.append(tmp, res.ptr);
        buf.push_back(',');
    }
    return sha256_hex(buf).substr(0, 16);
}

}  // namespace tipwise
