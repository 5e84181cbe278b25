#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tipwise/core/types.hpp"

namespace tipwise {

/// A flagged departure from a retrieved tip (tip_id set) or from the goal
/// itself (tip_id empty).
struct DeviationFlag {
    std::string tip_id;
    std::string reason;
    bool operator==(const DeviationFlag&) const = default;
};

/// The compressed memory m_t. The three text sections follow the
/// summarizer output format; the remaining fields travel in a fenced
/// `meta` block.
struct BeliefState {
    std::string progress_and_knowledge_check;
    std::string state_analysis;
    std::optional<std::string> next_step_guidance;
    std::string active_subgoal;
    std::vector<std::string> collapsed_history;  // one line per closed subgoal
    std::vector<std::string> details;            // actions within the active subgoal
    std::vector<std::string> notes;              // take_note ledger, never dropped
    std::optional<DeviationFlag> deviation_flag;
    std::string scope;      // url path prefix of the active subgoal
    std::string last_url;   // page the next action is planned on
    std::size_t char_len = 0;

    bool empty() const;
    bool operator==(const BeliefState&) const = default;
};

inline constexpr std::string_view kProgressHeader = "## Current Progress & Knowledge Check";
inline constexpr std::string_view kStateHeader = "## Current State Analysis";
inline constexpr std::string_view kGuidanceHeader = "## Next-step Guidance";

/// Exact text embedded into the operator prompt; char_len is its size.
std::string render(const BeliefState& b);

/// Inverse of render (char_len recomputed). Throws ParseError when a
/// required section or the meta block is missing.
BeliefState parse_belief(std::string_view text);

/// Normalizes section text so it can never forge a header or fence:
/// strips trailing whitespace and indents lines that start with `## ` or
/// a backtick fence.
std::string sanitize_section(std::string_view text);

/// Longest suffix of `lines` whose total length fits `budget`.
std::vector<std::string> collapse(const std::vector<std::string>& lines, std::size_t budget);

void to_json(json& j, const BeliefState& b);
void from_json(const json& j, BeliefState& b);

}  // namespace tipwise
