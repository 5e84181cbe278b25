#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "tipwise/core/error.hpp"
#include "tipwise/core/types.hpp"

namespace tipwise {

struct Click {
    std::string bid;
    bool operator==(const Click&) const = default;
};
struct Hover {
    std::string bid;
    bool operator==(const Hover&) const = default;
};
struct Type {
    std::string bid;
    std::string text;
    bool press_enter = false;
    bool operator==(const Type&) const = default;
};
struct Press {
    std::string key_combo;
    bool operator==(const Press&) const = default;
};

enum class ScrollDirection { up, down, left, right };

struct Scroll {
    ScrollDirection direction = ScrollDirection::down;
    int amount = 1;  // viewports
    bool operator==(const Scroll&) const = default;
};
struct GoTo {
    std::string url;
    bool operator==(const GoTo&) const = default;
};
struct GoBack {
    bool operator==(const GoBack&) const = default;
};
struct GoForward {
    bool operator==(const GoForward&) const = default;
};
struct NewTab {
    bool operator==(const NewTab&) const = default;
};
struct TabFocus {
    int index = 0;
    bool operator==(const TabFocus&) const = default;
};
struct TabClose {
    bool operator==(const TabClose&) const = default;
};
struct TakeNote {
    std::string text;
    bool operator==(const TakeNote&) const = default;
};
struct Calculate {
    std::string expr;
    bool operator==(const Calculate&) const = default;
};
struct Stop {
    std::optional<std::string> answer;
    bool operator==(const Stop&) const = default;
};

using Action = std::variant<Click, Hover, Type, Press, Scroll, GoTo, GoBack, GoForward, NewTab,
                            TabFocus, TabClose, TakeNote, Calculate, Stop>;

std::string_view action_name(const Action& a);
bool is_known_action_name(std::string_view name);

/// Element actions must be grounded against the observation's marks.
std::optional<std::string_view> target_bid(const Action& a);
bool is_stop(const Action& a);

/// The argument guard and transition patterns glob against: the bid for
/// element actions, url for goto, key combo, note text, expression, answer.
std::string primary_argument(const Action& a);

std::string_view to_string(ScrollDirection d);

/// Canonical text form, e.g. `type("12", "hello", true)`. Injective.
std::string serialize(const Action& a);

/// Byte range in the parsed input a grammar error points at.
struct SourceSpan {
    std::size_t offset = 0;
    std::size_t length = 0;
    std::string text;
};

class ActionParseError : public Error {
public:
    ActionParseError(ErrorCode code, const std::string& message, SourceSpan span)
        : Error(code, message, span.text), span_(std::move(span)) {}
    const SourceSpan& span() const noexcept { return span_; }

private:
    SourceSpan span_;
};

/// Parses exactly one action; trailing content is an error.
Action parse_action(std::string_view text);

struct ActionDecision {
    std::string think;
    Action action;
    std::string raw;
    int retry_count = 0;
};

/// Extracts `<think>` (optional) and exactly one action from `<action>`.
/// Errors: MissingActionTag, MultipleActions, UnknownActionName,
/// MalformedArguments, all as ActionParseError carrying the offending span.
ActionDecision parse_envelope(std::string_view raw);

/// `name` or `name("glob")`: matches actions by name (or `*`) and,
/// optionally, a glob over primary_argument().
struct ActionPattern {
    std::string name;
    std::optional<std::string> arg_glob;

    bool matches(const Action& a) const;
    std::string to_string() const;
    bool operator==(const ActionPattern&) const = default;
};

/// Throws MalformedArguments / UnknownActionName for patterns that are not
/// grammar-valid.
ActionPattern parse_action_pattern(std::string_view text);

void to_json(json& j, const ActionDecision& d);

}  // namespace tipwise
