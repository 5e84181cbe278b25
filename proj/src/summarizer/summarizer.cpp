#include "tipwise/summarizer/summarizer.hpp"

#include <tipwise/prompt_assets.hpp>

#include "tipwise/core/error.hpp"
#include "tipwise/core/text.hpp"

namespace tipwise {

std::optional<DeviationFlag> check_guards(const RetrievedKnowledge& knowledge, const Action& planned,
                                          const Observation& obs) {
    for (const auto& item : knowledge.items) {
        const auto& g = item.tip.guard;
        if (!g || !match_url(g->when_url, obs.url)) continue;
        bool hit = g->action.matches(planned);
        bool violated = g->kind == Guard::Kind::forbid ? hit : !hit;
        if (!violated) continue;
        std::string reason = g->message;
        if (reason.empty()) {
            reason = std::string(g->kind == Guard::Kind::forbid ? "forbids " : "requires ") + g->action.to_string() +
                     " on " + g->when_url;
        }
        return DeviationFlag{item.tip.id, reason};
    }
    return std::nullopt;
}

std::string path_prefix(std::string_view url, std::size_t segments) {
    auto scheme = url.find("://");
    std::size_t path_begin = scheme == std::string_view::npos ? 0 : url.find('/', scheme + 3);
    if (path_begin == std::string_view::npos) return "/";
    auto path = url.substr(path_begin);
    path = path.substr(0, path.find_first_of("?#"));
    std::string out;
    std::size_t taken = 0;
    std::size_t i = 0;
    while (i < path.size() && taken < segments) {
        while (i < path.size() && path[i] == '/') ++i;
        if (i >= path.size()) break;
        auto end = path.find('/', i);
        if (end == std::string_view::npos) end = path.size();
        out += "/";
        out += path.substr(i, end - i);
        ++taken;
        i = end;
    }
    return out.empty() ? "/" : out;
}

std::string describe_action(int step, const Action& a, const std::optional<json>& result) {
    std::string out = "step " + std::to_string(step) + ": " + serialize(a);
    if (result && result->is_object()) {
        if (result->contains("value") && (*result)["value"].is_string()) {
            out += " = " + (*result)["value"].get<std::string>();
        }
        if (!result->value("ok", true)) out += " (failed: " + result->value("note", std::string()) + ")";
    }
    return out;
}

namespace {

std::string page_title(const Observation& obs) {
    auto nl = obs.ax_tree.find('\n');
    auto first = text::trim(std::string_view(obs.ax_tree).substr(0, nl));
    return first.empty() ? obs.url : first;
}

std::string initial_subgoal(const Goal& goal) {
    return "Start: " + text::utf8_truncate(goal.instruction, 160);
}

std::string close_line(const std::string& subgoal, const std::vector<std::string>& details) {
    std::string out = "[done] " + subgoal + " (" + std::to_string(details.size()) + " actions";
    if (!details.empty()) out += "; last " + details.back();
    return out + ")";
}

std::string default_guidance(const DeviationFlag& v, const RetrievedKnowledge& k) {
    std::string out = "Deviation from tip " + v.tip_id + ": " + v.reason + ".";
    for (const auto& item : k.items) {
        if (item.tip.id == v.tip_id) {
            out += "\nTip guidance: \"" + item.tip.action_guidance + "\"";
            break;
        }
    }
    return out;
}

}  // namespace

// ---- stub model ------------------------------------------------------------

SummaryDraft StubSummaryModel::draft(const SummaryInput& in) {
    SummaryDraft d;
    d.progress = "Completed subgoals: " + std::to_string(in.prev.collapsed_history.size()) + ".\n";
    d.progress += "Last action: ";
    d.progress += in.last_action ? describe_action(in.obs.step - 1, *in.last_action, in.last_result) : "none";
    d.progress += "\nKnowledge check: ";
    if (in.knowledge.empty()) {
        d.progress += "no relevant knowledge; standard progress tracking.";
    } else if (in.guard_violation) {
        d.progress += "the last action conflicts with tip " + in.guard_violation->tip_id + ".";
    } else {
        d.progress += "recent actions are consistent with " + std::to_string(in.knowledge.items.size()) +
                      " retrieved tip(s).";
    }

    d.state_analysis = "Page: " + page_title(in.obs) + " at " + in.obs.url + "\n";
    if (in.obs.marks.empty()) {
        d.state_analysis += "No interactive elements.";
    } else {
        d.state_analysis += "Interactive elements:";
        std::size_t shown = 0;
        for (const auto& m : in.obs.marks) {
            if (shown++ == 12) {
                d.state_analysis += " ...";
                break;
            }
            d.state_analysis += " [" + m.bid + "] " + m.role;
        }
    }
    if (in.guard_violation) d.guidance = default_guidance(*in.guard_violation, in.knowledge);
    return d;
}

// ---- model-backed ----------------------------------------------------------

LlmSummaryModel::LlmSummaryModel(std::shared_ptr<llm::ChatModel> model, std::string model_id)
    : model_(std::move(model)), model_id_(std::move(model_id)) {}

llm::ChatRequest LlmSummaryModel::build_request(const SummaryInput& in, const std::string& model_id) {
    std::string system = prompts::summarizer_system;
    system += "\n\n";
    system += prompts::summarizer_format;

    std::string user = "goal: " + in.goal.instruction + "\n\nrelevant_knowledge:\n";
    if (in.knowledge.empty()) {
        user += "(empty)\n";
    } else {
        for (const auto& item : in.knowledge.items) user += render_tip(item.tip) + "\n\n";
    }
    if (in.guard_violation) {
        user += "\nguard_check: the last action violates tip " + in.guard_violation->tip_id + ": " +
                in.guard_violation->reason + "\n";
    }
    user += "\naxtree_txt:\n" + in.obs.ax_tree + "\n\naction_history:\n";
    for (const auto& d : in.prev.details) user += "- " + d + "\n";
    if (in.last_action) user += "- " + describe_action(in.obs.step - 1, *in.last_action, in.last_result) + "\n";
    user += "\nprevious_summary:\n";
    user += in.prev.empty() ? std::string("(none)") : render(in.prev);

    llm::ChatRequest req;
    req.model_id = model_id;
    req.messages = {{"system", system}, {"user", user}};
    return req;
}

namespace {

enum class Heading { none, progress, state, guidance };

Heading classify(std::string_view line) {
    std::string s = text::to_lower(text::trim(line));
    std::size_t i = 0;
    while (i < s.size() && (s[i] == '#' || s[i] == '*' || s[i] == ' ' || s[i] == '.' || std::isdigit(static_cast<unsigned char>(s[i])))) ++i;
    s = s.substr(i);
    while (!s.empty() && (s.back() == '*' || s.back() == ':' || s.back() == ' ')) s.pop_back();
    if (s == "current progress & knowledge check" || s == "current progress and knowledge check") return Heading::progress;
    if (s == "current state analysis") return Heading::state;
    if (s.starts_with("next-step guidance") || s.starts_with("next step guidance")) return Heading::guidance;
    return Heading::none;
}

}  // namespace

SummaryDraft LlmSummaryModel::parse_reply(std::string_view reply) {
    SummaryDraft d;
    std::string* target = &d.progress;
    std::string guidance;
    bool saw_guidance = false;
    for (const auto& line : text::split_lines(reply)) {
        auto h = classify(line);
        if (h == Heading::progress) {
            target = &d.progress;
            continue;
        }
        if (h == Heading::state) {
            target = &d.state_analysis;
            continue;
        }
        if (h == Heading::guidance) {
            target = &guidance;
            saw_guidance = true;
            continue;
        }
        auto trimmed = text::trim(line);
        if (text::starts_with(text::to_lower(trimmed), "subgoal:")) {
            auto v = text::trim(std::string_view(trimmed).substr(8));
            if (!v.empty()) d.subgoal = v;
            continue;
        }
        *target += line;
        *target += '\n';
    }
    d.progress = text::trim(d.progress);
    d.state_analysis = text::trim(d.state_analysis);
    guidance = text::trim(guidance);
    if (saw_guidance && !guidance.empty()) d.guidance = guidance;
    return d;
}

SummaryDraft LlmSummaryModel::draft(const SummaryInput& in) {
    auto req = build_request(in, model_id_);
    try {
        return parse_reply(model_->complete(req).text);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ModelUnavailable) throw;
        throw Error(ErrorCode::ModelUnavailable, std::string("summary model failed: ") + e.what(),
                    std::string(to_string(e.code())) + ": " + e.detail());
    }
}

// ---- summarizer ----------------------------------------------------------------

Summarizer::Summarizer(std::shared_ptr<SummaryModel> model, SummarizerConfig cfg)
    : model_(model ? std::move(model) : std::make_shared<StubSummaryModel>()), cfg_(cfg) {}

BeliefState Summarizer::summarize(const BeliefState& prev, const Observation& obs, const RetrievedKnowledge& knowledge,
                                  const std::optional<Action>& last_action, const Goal& goal,
                                  const std::optional<json>& last_result) const {
    std::optional<DeviationFlag> violation;
    if (!knowledge.empty() && last_action) {
        Observation at = obs;
        if (!prev.last_url.empty()) at.url = prev.last_url;
        violation = check_guards(knowledge, *last_action, at);
    }
    SummaryInput in{prev, obs, knowledge, last_action, last_result, goal, violation};
    auto d = model_->draft(in);

    BeliefState b;
    b.collapsed_history = prev.collapsed_history;
    b.details = prev.details;
    b.notes = prev.notes;
    b.active_subgoal = prev.active_subgoal.empty() ? initial_subgoal(goal) : prev.active_subgoal;
    b.scope = prev.scope;
    if (last_action) {
        b.details.push_back(describe_action(obs.step - 1, *last_action, last_result));
        if (auto* note = std::get_if<TakeNote>(&*last_action)) b.notes.push_back(note->text);
    }

    auto prefix = path_prefix(obs.url);
    std::optional<std::string> next_subgoal;
    if (d.subgoal && !text::trim(*d.subgoal).empty()) {
        if (*d.subgoal != b.active_subgoal) next_subgoal = *d.subgoal;
    } else if (!b.scope.empty() && prefix != b.scope) {
        next_subgoal = "Continue at " + prefix;
    }
    if (next_subgoal) {
        b.collapsed_history.push_back(close_line(b.active_subgoal, b.details));
        b.details.clear();
        b.active_subgoal = *next_subgoal;
    }
    b.scope = prefix;
    b.last_url = obs.url;

    b.progress_and_knowledge_check = sanitize_section(d.progress);
    b.state_analysis = sanitize_section(d.state_analysis);
    if (violation) {
        b.deviation_flag = violation;
        b.next_step_guidance = sanitize_section(d.guidance ? *d.guidance : default_guidance(*violation, knowledge));
    } else if (d.guidance) {
        b.deviation_flag = DeviationFlag{"", "goal deviation"};
        b.next_step_guidance = sanitize_section(*d.guidance);
    }
    enforce_budget(b);
    return b;
}

void Summarizer::enforce_budget(BeliefState& b) const {
    const auto budget = cfg_.budget_chars;
    auto fits = [&] {
        b.char_len = render(b).size();
        return b.char_len <= budget;
    };
    if (fits()) return;
    while (!b.collapsed_history.empty()) {
        b.collapsed_history.erase(b.collapsed_history.begin());
        if (fits()) return;
    }
    while (!b.details.empty()) {
        b.details.erase(b.details.begin());
        if (fits()) return;
    }
    std::string* guidance = b.next_step_guidance ? &*b.next_step_guidance : nullptr;
    for (std::string* s : {&b.state_analysis, &b.progress_and_knowledge_check, guidance, &b.active_subgoal}) {
        if (!s) continue;
        while (!s->empty()) {
            std::size_t over = b.char_len - budget;
            *s = sanitize_section(text::utf8_truncate(*s, s->size() > over ? s->size() - over : 0));
            if (fits()) return;
        }
    }
    throw Error(ErrorCode::BudgetImpossible, "belief state cannot fit the budget",
                "budget=" + std::to_string(budget) + " minimum=" + std::to_string(b.char_len));
}

}  // namespace tipwise
