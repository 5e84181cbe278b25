#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tipwise/action/action.hpp"
#include "tipwise/akb/knowledge_base.hpp"
#include "tipwise/llm/chat.hpp"
#include "tipwise/summarizer/belief.hpp"

namespace tipwise {

/// Stands in for the knowledge section when nothing was retrieved.
inline constexpr std::string_view kNoKnowledgeMarker = "(no relevant knowledge for this page)";
inline constexpr std::string_view kNoMemoryMarker = "(no memory yet)";

struct OperatorConfig {
    int parse_retries = 2;
    std::vector<std::string> url_templates;  // parameterized URLs the site declares
    std::string model_id;
};

struct PromptMessages {
    std::string system;
    std::string user;
};

std::string render_system_prompt(const std::vector<std::string>& url_templates);

/// `memory` is the rendered belief state, or a raw-history digest when the
/// summarizer is disabled.
PromptMessages render_messages(const Observation& obs, std::string_view memory, const RetrievedKnowledge& knowledge,
                               const Goal& goal, const std::vector<std::string>& url_templates = {});

/// Full prompt text (system, blank line, user). Pure.
std::string render_prompt(const Observation& obs, const BeliefState& belief, const RetrievedKnowledge& knowledge,
                          const Goal& goal, const std::vector<std::string>& url_templates = {});

/// Follow-up user message after an unparseable reply.
std::string repair_nudge(const ActionParseError& e);

/// A decision that failed after all model calls; keeps what the trajectory
/// needs to record.
class DecisionError : public Error {
public:
    DecisionError(ErrorCode code, const std::string& message, std::string detail, std::string raw, int retry_count)
        : Error(code, message, std::move(detail)), raw_(std::move(raw)), retry_count_(retry_count) {}
    const std::string& raw() const noexcept { return raw_; }
    int retry_count() const noexcept { return retry_count_; }

private:
    std::string raw_;
    int retry_count_;
};

class Operator {
public:
    Operator(std::shared_ptr<llm::ChatModel> model, OperatorConfig cfg = {});

    /// At most 1 + parse_retries model calls. Throws DecisionError with
    /// ParseFailure or GroundingFailure, or ModelUnavailable.
    ActionDecision decide(const Observation& obs, std::string_view memory, const RetrievedKnowledge& knowledge,
                          const Goal& goal) const;
    ActionDecision decide(const Observation& obs, const BeliefState& belief, const RetrievedKnowledge& knowledge,
                          const Goal& goal) const;

    const OperatorConfig& config() const { return cfg_; }

private:
    std::shared_ptr<llm::ChatModel> model_;
    OperatorConfig cfg_;
};

}  // namespace tipwise
