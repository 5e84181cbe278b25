#pragma once

#include <memory>
#include <optional>
#include <string>

#include "tipwise/action/action.hpp"
#include "tipwise/akb/knowledge_base.hpp"
#include "tipwise/llm/chat.hpp"
#include "tipwise/summarizer/belief.hpp"

namespace tipwise {

/// First violated guard in cascade order, as (tip_id, reason). Guards only
/// apply while `obs.url` matches their `when_url`.
std::optional<DeviationFlag> check_guards(const RetrievedKnowledge& knowledge, const Action& planned,
                                          const Observation& obs);

/// Everything a summary model may look at for one update.
struct SummaryInput {
    const BeliefState& prev;
    const Observation& obs;
    const RetrievedKnowledge& knowledge;
    const std::optional<Action>& last_action;
    const std::optional<json>& last_result;  // env_result payload of the last step
    const Goal& goal;
    const std::optional<DeviationFlag>& guard_violation;
};

/// Model output before enforcement. A non-empty `subgoal` that differs from
/// the previous one closes the active subgoal.
struct SummaryDraft {
    std::string progress;
    std::string state_analysis;
    std::optional<std::string> guidance;
    std::optional<std::string> subgoal;
};

class SummaryModel {
public:
    virtual ~SummaryModel() = default;
    /// Throws ModelUnavailable when the backing model cannot answer.
    virtual SummaryDraft draft(const SummaryInput& in) = 0;
};

/// Deterministic template-based model; no subgoal opinions, so boundaries
/// come from the url-prefix fallback.
class StubSummaryModel final : public SummaryModel {
public:
    SummaryDraft draft(const SummaryInput& in) override;
};

/// Chat-model backed summaries using the summarizer prompt template.
class LlmSummaryModel final : public SummaryModel {
public:
    LlmSummaryModel(std::shared_ptr<llm::ChatModel> model, std::string model_id = {});
    SummaryDraft draft(const SummaryInput& in) override;

    static llm::ChatRequest build_request(const SummaryInput& in, const std::string& model_id);
    /// Splits a model reply into sections; text before any heading is
    /// treated as progress.
    static SummaryDraft parse_reply(std::string_view reply);

private:
    std::shared_ptr<llm::ChatModel> model_;
    std::string model_id_;
};

/// `/a/b/c?x` -> `/a/b`; the fallback subgoal boundary key.
std::string path_prefix(std::string_view url, std::size_t segments = 2);

struct SummarizerConfig {
    std::size_t budget_chars = 4096;
};

class Summarizer {
public:
    Summarizer(std::shared_ptr<SummaryModel> model, SummarizerConfig cfg = {});

    /// Produces m_t from m_{t-1}. Throws ModelUnavailable and
    /// BudgetImpossible; the result always satisfies
    /// `render(result).size() <= budget_chars`.
    BeliefState summarize(const BeliefState& prev, const Observation& obs, const RetrievedKnowledge& knowledge,
                          const std::optional<Action>& last_action, const Goal& goal,
                          const std::optional<json>& last_result = std::nullopt) const;

    /// Shrinks `b` in place until it fits: oldest history, oldest details,
    /// then section tails. Notes are never dropped.
    void enforce_budget(BeliefState& b) const;

    const SummarizerConfig& config() const { return cfg_; }

private:
    std::shared_ptr<SummaryModel> model_;
    SummarizerConfig cfg_;
};

/// One-line description of an executed action for history lists.
std::string describe_action(int step, const Action& a, const std::optional<json>& result);

}  // namespace tipwise
