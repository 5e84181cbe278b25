#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace tipwise {

using json = nlohmann::json;

/// One named assertion over the terminal environment state, e.g.
/// `cart_count == 1`. `var` may also be `$page` or `$url`.
struct ProgrammaticCheck {
    std::string name;
    std::string var;
    std::string op;  // == != < <= > >= contains
    json value;
};

/// How a task is judged. Answer-based specs compare the stop answer;
/// programmatic specs validate the final state.
struct AnswerSpec {
    enum class Kind { exact, must_include, programmatic };
    Kind kind = Kind::exact;
    std::vector<std::string> values;          // exact: one value; must_include: all
    std::vector<ProgrammaticCheck> checks;    // programmatic
};

struct Goal {
    std::string id;
    std::string instruction;
    std::optional<std::string> site_hint;
    std::optional<AnswerSpec> reference_answer;
};

struct Mark {
    std::string bid;
    std::string role;
    std::string name;
    bool enabled = true;

    bool operator==(const Mark&) const = default;
};

struct Observation {
    int step = 0;
    std::string url;
    std::string ax_tree;
    std::vector<Mark> marks;
    std::optional<std::string> screenshot_ref;
    std::string page_fingerprint;

    const Mark* find_mark(std::string_view bid) const;
    bool operator==(const Observation&) const = default;
};

/// Builds an observation, enforcing bid uniqueness and computing the
/// fingerprint. A non-zero `ax_tree_cap` truncates the tree tail first.
Observation make_observation(int step, std::string url, std::string ax_tree,
                             std::vector<Mark> marks, std::size_t ax_tree_cap = 0,
                             std::optional<std::string> screenshot_ref = std::nullopt);

enum class AblationMode { full, no_knowledge, no_summarizer, vanilla };

std::string_view to_string(AblationMode mode);
AblationMode parse_ablation_mode(std::string_view s);
inline bool uses_knowledge(AblationMode m) {
    return m == AblationMode::full || m == AblationMode::no_summarizer;
}
inline bool uses_summarizer(AblationMode m) {
    return m == AblationMode::full || m == AblationMode::no_knowledge;
}

struct LlmEndpointConfig {
    std::string url;          // base URL of an OpenAI-compatible server
    std::string api_key;
    std::string model_id = "gpt-5";
    int timeout_ms = 60000;
    double temperature = 0.0;
};

struct RunConfig {
    int max_steps = 30;
    std::size_t belief_budget_chars = 4096;
    std::string akb_path;
    LlmEndpointConfig llm;
    AblationMode ablation_mode = AblationMode::full;
    std::size_t retrieve_limit = 5;
    std::size_t ax_tree_max_chars = 16000;
    std::size_t history_window = 5;   // raw-history digest size when the summarizer is off
    int parse_retries = 2;

    /// Throws InvalidArgument when an invariant is broken.
    void validate() const;
};

void to_json(json& j, const ProgrammaticCheck& c);
void from_json(const json& j, ProgrammaticCheck& c);
void to_json(json& j, const AnswerSpec& s);
void from_json(const json& j, AnswerSpec& s);
void to_json(json& j, const Goal& g);
void from_json(const json& j, Goal& g);
void to_json(json& j, const Mark& m);
void from_json(const json& j, Mark& m);
void to_json(json& j, const Observation& o);
void from_json(const json& j, Observation& o);

}  // namespace tipwise
