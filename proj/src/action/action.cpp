#include "tipwise/action/action.hpp"

#include <array>
#include <charconv>
#include <climits>
#include <vector>

#include "tipwise/action/calculator.hpp"
#include "tipwise/core/glob.hpp"
#include "tipwise/core/text.hpp"

namespace tipwise {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr std::array<std::string_view, 14> kActionNames = {
    "click", "hover", "type", "press", "scroll", "goto", "go_back", "go_forward",
    "new_tab", "tab_focus", "tab_close", "take_note", "calculate", "stop"};

// ---- serialization ---------------------------------------------------------

void append_quoted(std::string& out, std::string_view s) {
    out.push_back('"');
    for (char ch : s) {
        auto c = static_cast<unsigned char>(ch);
        switch (ch) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default:
                if (c < 0x20) {
                    static constexpr char kHex[] = "0123456789abcdef";
                    out += "\\u00";
                    out.push_back(kHex[c >> 4]);
                    out.push_back(kHex[c & 0xf]);
                } else {
                    out.push_back(ch);
                }
        }
    }
    out.push_back('"');
}

std::string call(std::string_view name, std::initializer_list<std::string> args) {
    std::string out(name);
    out.push_back('(');
    bool first = true;
    for (const auto& a : args) {
        if (!first) out += ", ";
        out += a;
        first = false;
    }
    out.push_back(')');
    return out;
}

std::string quote_arg(std::string_view s) {
    std::string out;
    append_quoted(out, s);
    return out;
}

// ---- lexing ---------------------------------------------------------------

struct Arg {
    enum class Kind { string, integer, boolean } kind = Kind::string;
    std::string str;
    long long integer = 0;
    bool boolean = false;
    SourceSpan span;
};

struct Call {
    std::string name;
    SourceSpan name_span;
    bool has_parens = false;
    std::vector<Arg> args;
    SourceSpan span;
};

bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_ident_char(char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9');
}
bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
}

void encode_utf8(std::string& out, unsigned cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

class Lexer {
public:
    Lexer(std::string_view src, std::size_t base) : src_(src), base_(base) {}

    std::size_t pos() const { return pos_; }
    bool at_end() const { return pos_ >= src_.size(); }
    std::string_view rest() const { return src_.substr(pos_); }

    void skip_ws() {
        while (pos_ < src_.size() && is_space(src_[pos_])) ++pos_;
    }

    SourceSpan span(std::size_t from, std::size_t to) const {
        to = std::min(to, src_.size());
        return SourceSpan{base_ + from, to - from, std::string(src_.substr(from, to - from))};
    }

    [[noreturn]] void fail(ErrorCode code, const std::string& msg, std::size_t from,
                           std::size_t to) const {
        if (to <= from) to = std::min(from + 1, src_.size());
        throw ActionParseError(code, msg, span(from, to));
    }

    // Parses `name` optionally followed by `(args)`.
    Call parse_call(bool parens_required) {
        skip_ws();
        Call c;
        std::size_t start = pos_;
        if (pos_ < src_.size() && src_[pos_] == '*') {
            ++pos_;
        } else {
            if (pos_ >= src_.size() || !is_ident_start(src_[pos_])) {
                fail(ErrorCode::MalformedArguments, "expected an action name", start,
                     std::min(src_.size(), start + 16));
            }
            while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
        }
        c.name = std::string(src_.substr(start, pos_ - start));
        c.name_span = span(start, pos_);
        skip_ws();
        if (pos_ >= src_.size() || src_[pos_] != '(') {
            if (parens_required) {
                fail(ErrorCode::MalformedArguments, "expected '(' after action name", start, pos_);
            }
            c.span = span(start, pos_);
            return c;
        }
        c.has_parens = true;
        ++pos_;
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == ')') {
            ++pos_;
            c.span = span(start, pos_);
            return c;
        }
        for (;;) {
            skip_ws();
            c.args.push_back(parse_arg());
            skip_ws();
            if (pos_ >= src_.size()) {
                fail(ErrorCode::MalformedArguments, "unterminated argument list", start, pos_);
            }
            if (src_[pos_] == ',') {
                ++pos_;
                continue;
            }
            if (src_[pos_] == ')') {
                ++pos_;
                break;
            }
            fail(ErrorCode::MalformedArguments, "expected ',' or ')'", pos_, pos_ + 1);
        }
        c.span = span(start, pos_);
        return c;
    }

private:
    Arg parse_arg() {
        std::size_t start = pos_;
        Arg a;
        if (pos_ < src_.size() && src_[pos_] == '"') {
            a.kind = Arg::Kind::string;
            a.str = parse_string();
        } else if (pos_ < src_.size() &&
                   (src_[pos_] == '-' || (src_[pos_] >= '0' && src_[pos_] <= '9'))) {
            a.kind = Arg::Kind::integer;
            std::size_t b = pos_;
            if (src_[pos_] == '-') ++pos_;
            while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') ++pos_;
            auto res = std::from_chars(src_.data() + b, src_.data() + pos_, a.integer);
            if (res.ec != std::errc() || res.ptr != src_.data() + pos_) {
                fail(ErrorCode::MalformedArguments, "bad integer argument", b, pos_);
            }
        } else if (rest().substr(0, 4) == "true" || rest().substr(0, 5) == "false") {
            a.kind = Arg::Kind::boolean;
            a.boolean = rest()[0] == 't';
            pos_ += a.boolean ? 4 : 5;
            if (pos_ < src_.size() && is_ident_char(src_[pos_])) {
                fail(ErrorCode::MalformedArguments, "unexpected identifier argument", start, pos_ + 1);
            }
        } else {
            std::size_t end = pos_;
            while (end < src_.size() && !is_space(src_[end]) && src_[end] != ',' && src_[end] != ')') ++end;
            fail(ErrorCode::MalformedArguments, "arguments must be quoted strings, integers or booleans",
                 start, end);
        }
        a.span = span(start, pos_);
        return a;
    }

    std::string parse_string() {
        std::size_t start = pos_;
        ++pos_;  // opening quote
        std::string out;
        while (pos_ < src_.size()) {
            char c = src_[pos_++];
            if (c == '"') return out;
            if (c != '\\') {
                out.push_back(c);
                continue;
            }
            if (pos_ >= src_.size()) break;
            char e = src_[pos_++];
            switch (e) {
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                case '/': out.push_back('/'); break;
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case 'r': out.push_back('\r'); break;
                case 'u': {
                    unsigned cp = 0;
                    if (pos_ + 4 > src_.size()) {
                        fail(ErrorCode::MalformedArguments, "truncated \\u escape", pos_ - 2, pos_);
                    }
                    auto res = std::from_chars(src_.data() + pos_, src_.data() + pos_ + 4, cp, 16);
                    if (res.ec != std::errc() || res.ptr != src_.data() + pos_ + 4) {
                        fail(ErrorCode::MalformedArguments, "bad \\u escape", pos_ - 2, pos_ + 4);
                    }
                    pos_ += 4;
                    encode_utf8(out, cp);
                    break;
                }
                default:
                    fail(ErrorCode::MalformedArguments, "unknown escape sequence", pos_ - 2, pos_);
            }
        }
        fail(ErrorCode::MalformedArguments, "unterminated string", start, src_.size());
    }

    std::string_view src_;
    std::size_t base_;
    std::size_t pos_ = 0;
};

// ---- building actions -----------------------------------------------------

[[noreturn]] void bad_args(const Call& c, const std::string& why) {
    throw ActionParseError(ErrorCode::MalformedArguments, c.name + ": " + why, c.span);
}

void expect_arity(const Call& c, std::size_t lo, std::size_t hi) {
    if (c.args.size() < lo || c.args.size() > hi) {
        std::string want = lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi);
        bad_args(c, "expected " + want + " argument(s), got " + std::to_string(c.args.size()));
    }
}

const std::string& str_arg(const Call& c, std::size_t i) {
    if (c.args[i].kind != Arg::Kind::string) bad_args(c, "argument " + std::to_string(i + 1) + " must be a string");
    return c.args[i].str;
}

long long int_arg(const Call& c, std::size_t i) {
    if (c.args[i].kind != Arg::Kind::integer) bad_args(c, "argument " + std::to_string(i + 1) + " must be an integer");
    return c.args[i].integer;
}

std::string bid_arg(const Call& c) {
    const auto& bid = str_arg(c, 0);
    if (bid.empty()) bad_args(c, "bid must be non-empty");
    for (char ch : bid) {
        if (is_space(ch)) bad_args(c, "bid must not contain whitespace");
    }
    return bid;
}

std::optional<ScrollDirection> parse_direction(std::string_view s) {
    if (s == "up") return ScrollDirection::up;
    if (s == "down") return ScrollDirection::down;
    if (s == "left") return ScrollDirection::left;
    if (s == "right") return ScrollDirection::right;
    return std::nullopt;
}

Action build(const Call& c) {
    if (!is_known_action_name(c.name)) {
        throw ActionParseError(ErrorCode::UnknownActionName, "unknown action '" + c.name + "'", c.name_span);
    }
    const auto& n = c.name;
    if (n == "click" || n == "hover") {
        expect_arity(c, 1, 1);
        if (n == "click") return Click{bid_arg(c)};
        return Hover{bid_arg(c)};
    }
    if (n == "type") {
        expect_arity(c, 2, 3);
        Type t{bid_arg(c), str_arg(c, 1), false};
        if (c.args.size() == 3) {
            if (c.args[2].kind != Arg::Kind::boolean) bad_args(c, "press_enter must be true or false");
            t.press_enter = c.args[2].boolean;
        }
        return t;
    }
    if (n == "press") {
        expect_arity(c, 1, 1);
        if (str_arg(c, 0).empty()) bad_args(c, "key combo must be non-empty");
        return Press{str_arg(c, 0)};
    }
    if (n == "scroll") {
        expect_arity(c, 1, 2);
        auto dir = parse_direction(str_arg(c, 0));
        if (!dir) bad_args(c, "direction must be up, down, left or right");
        Scroll s{*dir, 1};
        if (c.args.size() == 2) {
            auto amount = int_arg(c, 1);
            if (amount < 1 || amount > 1000) bad_args(c, "amount must be in [1, 1000]");
            s.amount = static_cast<int>(amount);
        }
        return s;
    }
    if (n == "goto") {
        expect_arity(c, 1, 1);
        if (str_arg(c, 0).empty()) bad_args(c, "url must be non-empty");
        return GoTo{str_arg(c, 0)};
    }
    if (n == "go_back") { expect_arity(c, 0, 0); return GoBack{}; }
    if (n == "go_forward") { expect_arity(c, 0, 0); return GoForward{}; }
    if (n == "new_tab") { expect_arity(c, 0, 0); return NewTab{}; }
    if (n == "tab_close") { expect_arity(c, 0, 0); return TabClose{}; }
    if (n == "tab_focus") {
        expect_arity(c, 1, 1);
        auto idx = int_arg(c, 0);
        if (idx < 0 || idx > INT_MAX) bad_args(c, "tab index must be non-negative");
        return TabFocus{static_cast<int>(idx)};
    }
    if (n == "take_note") {
        expect_arity(c, 1, 1);
        if (str_arg(c, 0).empty()) bad_args(c, "note must be non-empty");
        return TakeNote{str_arg(c, 0)};
    }
    if (n == "calculate") {
        expect_arity(c, 1, 1);
        try {
            validate_expression(str_arg(c, 0));
        } catch (const Error& e) {
            bad_args(c, e.what());
        }
        return Calculate{str_arg(c, 0)};
    }
    // stop
    expect_arity(c, 0, 1);
    if (c.args.empty()) return Stop{};
    return Stop{str_arg(c, 0)};
}

// After one full action, anything that starts another call means the model
// emitted several actions.
bool looks_like_call(std::string_view rest) {
    std::size_t i = 0;
    while (i < rest.size() && (is_space(rest[i]) || rest[i] == ';' || rest[i] == ',')) ++i;
    if (i >= rest.size() || !is_ident_start(rest[i])) return false;
    while (i < rest.size() && is_ident_char(rest[i])) ++i;
    while (i < rest.size() && is_space(rest[i])) ++i;
    return i < rest.size() && rest[i] == '(';
}

Action parse_action_at(std::string_view text, std::size_t base) {
    Lexer lx(text, base);
    auto c = lx.parse_call(true);
    auto action = build(c);
    lx.skip_ws();
    if (!lx.at_end()) {
        std::size_t at = lx.pos();
        if (looks_like_call(lx.rest())) {
            throw ActionParseError(ErrorCode::MultipleActions, "only a single action is allowed",
                                   lx.span(at, text.size()));
        }
        lx.fail(ErrorCode::MalformedArguments, "unexpected trailing content", at, text.size());
    }
    return action;
}

}  // namespace

std::string_view action_name(const Action& a) {
    return std::visit(overloaded{
                          [](const Click&) { return kActionNames[0]; },
                          [](const Hover&) { return kActionNames[1]; },
                          [](const Type&) { return kActionNames[2]; },
                          [](const Press&) { return kActionNames[3]; },
                          [](const Scroll&) { return kActionNames[4]; },
                          [](const GoTo&) { return kActionNames[5]; },
                          [](const GoBack&) { return kActionNames[6]; },
                          [](const GoForward&) { return kActionNames[7]; },
                          [](const NewTab&) { return kActionNames[8]; },
                          [](const TabFocus&) { return kActionNames[9]; },
                          [](const TabClose&) { return kActionNames[10]; },
                          [](const TakeNote&) { return kActionNames[11]; },
                          [](const Calculate&) { return kActionNames[12]; },
                          [](const Stop&) { return kActionNames[13]; },
                      },
                      a);
}

bool is_known_action_name(std::string_view name) {
    for (auto n : kActionNames) {
        if (n == name) return true;
    }
    return false;
}

std::optional<std::string_view> target_bid(const Action& a) {
    if (auto* c = std::get_if<Click>(&a)) return c->bid;
    if (auto* h = std::get_if<Hover>(&a)) return h->bid;
    if (auto* t = std::get_if<Type>(&a)) return t->bid;
    return std::nullopt;
}

bool is_stop(const Action& a) {
    return std::holds_alternative<Stop>(a);
}

std::string primary_argument(const Action& a) {
    return std::visit(overloaded{
                          [](const Click& c) { return c.bid; },
                          [](const Hover& h) { return h.bid; },
                          [](const Type& t) { return t.bid; },
                          [](const Press& p) { return p.key_combo; },
                          [](const Scroll& s) { return std::string(to_string(s.direction)); },
                          [](const GoTo& g) { return g.url; },
                          [](const GoBack&) { return std::string(); },
                          [](const GoForward&) { return std::string(); },
                          [](const NewTab&) { return std::string(); },
                          [](const TabFocus& t) { return std::to_string(t.index); },
                          [](const TabClose&) { return std::string(); },
                          [](const TakeNote& n) { return n.text; },
                          [](const Calculate& c) { return c.expr; },
                          [](const Stop& s) { return s.answer.value_or(""); },
                      },
                      a);
}

std::string_view to_string(ScrollDirection d) {
    switch (d) {
        case ScrollDirection::up: return "up";
        case ScrollDirection::down: return "down";
        case ScrollDirection::left: return "left";
        case ScrollDirection::right: return "right";
    }
    return "down";
}

std::string serialize(const Action& a) {
    auto name = action_name(a);
    return std::visit(
        overloaded{
            [&](const Click& c) { return call(name, {quote_arg(c.bid)}); },
            [&](const Hover& h) { return call(name, {quote_arg(h.bid)}); },
            [&](const Type& t) {
                if (t.press_enter) return call(name, {quote_arg(t.bid), quote_arg(t.text), "true"});
                return call(name, {quote_arg(t.bid), quote_arg(t.text)});
            },
            [&](const Press& p) { return call(name, {quote_arg(p.key_combo)}); },
            [&](const Scroll& s) {
                if (s.amount == 1) return call(name, {quote_arg(to_string(s.direction))});
                return call(name, {quote_arg(to_string(s.direction)), std::to_string(s.amount)});
            },
            [&](const GoTo& g) { return call(name, {quote_arg(g.url)}); },
            [&](const TabFocus& t) { return call(name, {std::to_string(t.index)}); },
            [&](const TakeNote& n) { return call(name, {quote_arg(n.text)}); },
            [&](const Calculate& c) { return call(name, {quote_arg(c.expr)}); },
            [&](const Stop& s) {
                if (!s.answer) return call(name, {});
                return call(name, {quote_arg(*s.answer)});
            },
            [&](const auto&) { return call(name, {}); },
        },
        a);
}

Action parse_action(std::string_view text) {
    return parse_action_at(text, 0);
}

ActionDecision parse_envelope(std::string_view raw) {
    static constexpr std::string_view kOpen = "<action>";
    static constexpr std::string_view kClose = "</action>";

    auto open = raw.find(kOpen);
    if (open == std::string_view::npos) {
        throw ActionParseError(ErrorCode::MissingActionTag, "response has no <action> tag",
                               SourceSpan{0, raw.size(), text::utf8_truncate(raw, 200)});
    }
    auto second = raw.find(kOpen, open + kOpen.size());
    if (second != std::string_view::npos) {
        throw ActionParseError(ErrorCode::MultipleActions, "response has more than one <action> tag",
                               SourceSpan{second, kOpen.size(), std::string(kOpen)});
    }
    std::size_t body_begin = open + kOpen.size();
    auto close = raw.find(kClose, body_begin);
    std::size_t body_end = close == std::string_view::npos ? raw.size() : close;

    // Trim whitespace, then optional ``` fences or a single backtick pair.
    std::size_t b = body_begin;
    std::size_t e = body_end;
    auto trim_ws = [&] {
        while (b < e && is_space(raw[b])) ++b;
        while (e > b && is_space(raw[e - 1])) --e;
    };
    trim_ws();
    if (raw.substr(b, e - b).starts_with("```")) {
        auto nl = raw.find('\n', b);
        b = (nl == std::string_view::npos || nl >= e) ? b + 3 : nl + 1;
        if (e - b >= 3 && raw.substr(e - 3, 3) == "```") e -= 3;
        trim_ws();
    } else if (e - b >= 2 && raw[b] == '`' && raw[e - 1] == '`') {
        ++b;
        --e;
        trim_ws();
    }
    if (b == e) {
        throw ActionParseError(ErrorCode::MissingActionTag, "<action> tag is empty",
                               SourceSpan{open, body_end - open, std::string(raw.substr(open, body_end - open))});
    }

    ActionDecision d;
    d.raw = std::string(raw);
    d.action = parse_action_at(raw.substr(b, e - b), b);
    auto think_open = raw.find("<think>");
    if (think_open != std::string_view::npos) {
        auto tb = think_open + 7;
        auto think_close = raw.find("</think>", tb);
        auto te = think_close == std::string_view::npos ? open : think_close;
        if (te >= tb) d.think = text::trim(raw.substr(tb, te - tb));
    }
    return d;
}

bool ActionPattern::matches(const Action& a) const {
    if (name != "*" && name != action_name(a)) return false;
    if (!arg_glob) return true;
    return glob_match(*arg_glob, primary_argument(a));
}

std::string ActionPattern::to_string() const {
    if (!arg_glob) return name;
    return name + "(" + quote_arg(*arg_glob) + ")";
}

ActionPattern parse_action_pattern(std::string_view text) {
    Lexer lx(text, 0);
    auto c = lx.parse_call(false);
    lx.skip_ws();
    if (!lx.at_end()) lx.fail(ErrorCode::MalformedArguments, "unexpected trailing content", lx.pos(), text.size());
    if (c.name != "*" && !is_known_action_name(c.name)) {
        throw ActionParseError(ErrorCode::UnknownActionName, "unknown action '" + c.name + "' in pattern",
                               c.name_span);
    }
    ActionPattern p;
    p.name = c.name;
    if (c.args.size() > 1) bad_args(c, "patterns take at most one glob argument");
    if (c.args.size() == 1) {
        if (c.args[0].kind != Arg::Kind::string) bad_args(c, "pattern argument must be a quoted glob");
        if (!glob_is_valid(c.args[0].str)) bad_args(c, "invalid glob");
        p.arg_glob = c.args[0].str;
    }
    return p;
}

void to_json(json& j, const ActionDecision& d) {
    j = json{{"kind", "action_decision"},
             {"think", d.think},
             {"action", serialize(d.action)},
             {"name", action_name(d.action)},
             {"raw", d.raw},
             {"retry_count", d.retry_count},
             {"terminal", is_stop(d.action)}};
}

}  // namespace tipwise
