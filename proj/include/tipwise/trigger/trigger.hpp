#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tipwise/core/trajectory.hpp"
#include "tipwise/llm/chat.hpp"
#include "tipwise/summarizer/belief.hpp"

namespace tipwise {

enum class TriggerSource { rule_loop, rule_budget, rule_parse, rule_error_page, semantic };

std::string_view to_string(TriggerSource s);
TriggerSource parse_trigger_source(std::string_view s);

struct TriggerVerdict {
    bool fired = false;
    std::optional<TriggerSource> source;  // set iff fired
    std::string detail;
    std::vector<int> evidence;  // steps of the trajectory that support the verdict
};

struct TriggerConfig {
    int loop_k = 3;
    int parse_m = 2;
    int max_steps = 30;
    std::vector<std::string> error_markers = {"404 Not Found", "500 Internal Server Error", "Access Denied"};
    bool semantic_enabled = false;
};

struct SemanticJudgement {
    bool consistent = true;
    std::string rationale;
};

/// Port for model-judged inconsistencies between goal, page and belief.
/// Implementations must tolerate concurrent calls.
class SemanticEvaluator {
public:
    virtual ~SemanticEvaluator() = default;
    virtual SemanticJudgement judge(const Goal& goal, const Observation& obs, const BeliefState* belief) = 0;
};

class AlwaysConsistent final : public SemanticEvaluator {
public:
    SemanticJudgement judge(const Goal&, const Observation&, const BeliefState*) override { return {}; }
};

/// Asks a chat model for CONSISTENT / INCONSISTENT plus a one-line reason.
class LlmSemanticEvaluator final : public SemanticEvaluator {
public:
    LlmSemanticEvaluator(std::shared_ptr<llm::ChatModel> model, std::string model_id = {});
    SemanticJudgement judge(const Goal& goal, const Observation& obs, const BeliefState* belief) override;

private:
    std::shared_ptr<llm::ChatModel> model_;
    std::string model_id_;
};

struct TriggerContext {
    const Goal* goal = nullptr;
    const BeliefState* belief = nullptr;
    SemanticEvaluator* semantic = nullptr;
};

/// One logged decision as the loop rule sees it.
struct ActEntry {
    int step = 0;
    std::optional<std::string> action;      // canonical action string; empty for failed decisions
    std::string page_fingerprint;           // fingerprint of the same step's observation
    std::optional<std::string> error_code;  // set for failed decisions
    bool terminal = false;
};

std::vector<ActEntry> act_entries(const Trajectory& traj);

/// f_trigger. Rules in order R1 loop, R2 budget, R3 parse, R4 error page,
/// then the semantic port when enabled. With the port disabled this is a
/// pure function of its arguments.
TriggerVerdict evaluate(const Observation& obs, const Trajectory& traj, const TriggerConfig& cfg,
                        const TriggerContext& ctx = {});

void to_json(json& j, const TriggerVerdict& v);
void from_json(const json& j, TriggerVerdict& v);

}  // namespace tipwise
