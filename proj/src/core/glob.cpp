#include "tipwise/core/glob.hpp"

#include <vector>

namespace tipwise {

namespace {

enum class TokKind : unsigned char { literal, any_one, any_span };

struct Tok {
    TokKind kind;
    char ch;
};

std::vector<Tok> compile(std::string_view pattern) {
    std::vector<Tok> toks;
    toks.reserve(pattern.size());
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        char c = pattern[i];
        if (c == '\\' && i + 1 < pattern.size()) {
            toks.push_back({TokKind::literal, pattern[++i]});
        } else if (c == '*') {
            toks.push_back({TokKind::any_span, 0});
        } else if (c == '?') {
            toks.push_back({TokKind::any_one, 0});
        } else {
            toks.push_back({TokKind::literal, c});
        }
    }
    return toks;
}

}  // namespace

bool glob_match(std::string_view pattern, std::string_view text) {
    const auto toks = compile(pattern);
    std::size_t p = 0;
    std::size_t s = 0;
    std::size_t star_p = std::string_view::npos;
    std::size_t star_s = 0;
    while (s < text.size()) {
        if (p < toks.size() && toks[p].kind == TokKind::any_span) {
            star_p = p++;
            star_s = s;
            continue;
        }
        if (p < toks.size() &&
            (toks[p].kind == TokKind::any_one || toks[p].ch == text[s])) {
            ++p;
            ++s;
            continue;
        }
        if (star_p == std::string_view::npos) return false;
        // backtrack: let the last star absorb one more byte
        p = star_p + 1;
        s = ++star_s;
    }
    while (p < toks.size() && toks[p].kind == TokKind::any_span) ++p;
    return p == toks.size();
}

bool glob_is_valid(std::string_view pattern) {
    if (pattern.empty()) return false;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        if (pattern[i] == '\\') {
            if (i + 1 == pattern.size()) return false;
            ++i;
        }
    }
    return true;
}

std::size_t glob_literal_count(std::string_view pattern) {
    std::size_t n = 0;
    for (const auto& t : compile(pattern)) {
        if (t.kind == TokKind::literal) ++n;
    }
    return n;
}

}  // namespace tipwise
