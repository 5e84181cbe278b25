#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tipwise/action/action.hpp"
#include "tipwise/core/types.hpp"

namespace tipwise {

/// Machine-checkable alignment rule: while the page url matches `when_url`,
/// the planned action must not match (forbid) or must match (require)
/// `action`.
struct Guard {
    enum class Kind { forbid, require };
    Kind kind = Kind::forbid;
    std::string when_url;
    ActionPattern action;
    std::string message;

    bool operator==(const Guard&) const = default;
};

/// One crystallized site-level prior. The four text fields follow the
/// Scope / Action / Constraint / Goal Alignment annotation template.
struct KnowledgeTip {
    std::string id;
    std::string domain_label;
    std::string scope;
    std::string action_guidance;
    std::string constraint;
    std::string goal_alignment;
    std::vector<std::string> url_patterns;
    std::vector<std::string> keywords;
    std::optional<Guard> guard;
    std::optional<std::string> source_failure_id;
    std::string created_at;

    bool operator==(const KnowledgeTip&) const = default;
};

/// Full-URL glob match (`*`, `?`, `\` escape). Never throws; invalid
/// patterns are rejected earlier by validate_url_pattern.
bool match_url(std::string_view pattern, std::string_view url);

/// Throws BadPattern.
void validate_url_pattern(std::string_view pattern);

/// Throws InvalidTip (or BadPattern for an invalid url pattern).
void validate_tip(const KnowledgeTip& tip);

/// Text the embedding stage compares against: the four template fields.
std::string tip_text(const KnowledgeTip& tip);

/// Prompt rendering: an `[id] (domain)` line followed by the four template
/// fields, one per line.
std::string render_tip(const KnowledgeTip& tip);

std::string_view to_string(Guard::Kind k);

void to_json(json& j, const Guard& g);
void from_json(const json& j, Guard& g);
void to_json(json& j, const KnowledgeTip& t);
void from_json(const json& j, KnowledgeTip& t);

}  // namespace tipwise
