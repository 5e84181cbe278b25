#include "tipwise/operator/operator.hpp"

#include <tipwise/prompt_assets.hpp>

#include "tipwise/core/error.hpp"

namespace tipwise {

std::string render_system_prompt(const std::vector<std::string>& url_templates) {
    std::string out = prompts::operator_system;
    out += "\n\n";
    out += prompts::action_space;
    if (!url_templates.empty()) {
        out += "\n\nURL-first navigation:\nWhen the target page can be reached by filling in one of these URL templates, "
               "prefer goto with the constructed URL over clicking through menus.\n";
        for (const auto& t : url_templates) out += "- " + t + "\n";
        out.pop_back();
    }
    return out;
}

PromptMessages render_messages(const Observation& obs, std::string_view memory, const RetrievedKnowledge& knowledge,
                               const Goal& goal, const std::vector<std::string>& url_templates) {
    PromptMessages m;
    m.system = render_system_prompt(url_templates);

    std::string& u = m.user;
    u += "# Goal\n" + goal.instruction + "\n\n# Relevant Knowledge\n";
    if (knowledge.empty()) {
        u += kNoKnowledgeMarker;
        u += "\n";
    } else {
        for (std::size_t i = 0; i < knowledge.items.size(); ++i) {
            if (i > 0) u += "\n";
            u += render_tip(knowledge.items[i].tip) + "\n";
        }
    }
    u += "\n# Memory\n";
    u += memory.empty() ? kNoMemoryMarker : memory;
    u += "\n\n# Current Page\nURL: " + obs.url + "\nAccessibility tree:\n" + obs.ax_tree + "\n\nMarked elements:\n";
    if (obs.marks.empty()) u += "(none)\n";
    for (const auto& mk : obs.marks) {
        u += "[" + mk.bid + "] " + mk.role + " '" + mk.name + "'";
        if (!mk.enabled) u += " (disabled)";
        u += "\n";
    }
    u.pop_back();
    return m;
}

std::string render_prompt(const Observation& obs, const BeliefState& belief, const RetrievedKnowledge& knowledge,
                          const Goal& goal, const std::vector<std::string>& url_templates) {
    auto m = render_messages(obs, belief.empty() ? std::string() : render(belief), knowledge, goal, url_templates);
    return m.system + "\n\n" + m.user;
}

std::string repair_nudge(const ActionParseError& e) {
    std::string rules = prompts::operator_system;
    auto at = rules.find("Formatting Rules:");
    if (at != std::string::npos) rules = rules.substr(at);
    std::string out = "Your previous response could not be executed (" + std::string(to_string(e.code())) + ": " +
                      e.what() + ").";
    if (!e.span().text.empty()) out += "\nOffending text: `" + e.span().text + "`";
    out += "\nReply again using exactly one <think> block and one <action> block.\n" + rules;
    return out;
}

Operator::Operator(std::shared_ptr<llm::ChatModel> model, OperatorConfig cfg)
    : model_(std::move(model)), cfg_(std::move(cfg)) {}

ActionDecision Operator::decide(const Observation& obs, const BeliefState& belief,
                                const RetrievedKnowledge& knowledge, const Goal& goal) const {
    return decide(obs, belief.empty() ? std::string() : render(belief), knowledge, goal);
}

ActionDecision Operator::decide(const Observation& obs, std::string_view memory, const RetrievedKnowledge& knowledge,
                                const Goal& goal) const {
    auto prompt = render_messages(obs, memory, knowledge, goal, cfg_.url_templates);
    llm::ChatRequest req;
    req.model_id = cfg_.model_id;
    req.messages = {{"system", prompt.system}, {"user", prompt.user}};

    for (int attempt = 0;; ++attempt) {
        std::string raw;
        try {
            raw = model_->complete(req).text;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::ModelUnavailable) throw;
            throw Error(ErrorCode::ModelUnavailable, std::string("operator model failed: ") + e.what(),
                        std::string(to_string(e.code())) + ": " + e.detail());
        }
        ActionDecision d;
        try {
            d = parse_envelope(raw);
        } catch (const ActionParseError& e) {
            if (attempt >= cfg_.parse_retries) {
                throw DecisionError(ErrorCode::ParseFailure,
                                    "model output unparseable after " + std::to_string(attempt + 1) + " call(s)",
                                    std::string(to_string(e.code())) + ": " + e.span().text, raw, attempt);
            }
            req.messages.push_back({"assistant", raw});
            req.messages.push_back({"user", repair_nudge(e)});
            continue;
        }
        d.retry_count = attempt;
        if (auto bid = target_bid(d.action); bid && !obs.find_mark(*bid)) {
            throw DecisionError(ErrorCode::GroundingFailure, "action targets a bid absent from the page",
                                std::string(*bid), raw, attempt);
        }
        return d;
    }
}

}  // namespace tipwise
