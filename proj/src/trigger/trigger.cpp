#include "tipwise/trigger/trigger.hpp"

#include <algorithm>

#include "tipwise/core/error.hpp"
#include "tipwise/core/text.hpp"

namespace tipwise {

std::string_view to_string(TriggerSource s) {
    switch (s) {
        case TriggerSource::rule_loop: return "rule_loop";
        case TriggerSource::rule_budget: return "rule_budget";
        case TriggerSource::rule_parse: return "rule_parse";
        case TriggerSource::rule_error_page: return "rule_error_page";
        case TriggerSource::semantic: return "semantic";
    }
    return "rule_loop";
}

TriggerSource parse_trigger_source(std::string_view s) {
    for (auto v : {TriggerSource::rule_loop, TriggerSource::rule_budget, TriggerSource::rule_parse,
                   TriggerSource::rule_error_page, TriggerSource::semantic}) {
        if (to_string(v) == s) return v;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown trigger source", std::string(s));
}

std::vector<ActEntry> act_entries(const Trajectory& traj) {
    std::vector<ActEntry> out;
    std::string fp;
    int fp_step = -1;
    for (const auto& ev : traj.events()) {
        if (ev.phase == Phase::observe) {
            fp = ev.payload.value("page_fingerprint", "");
            fp_step = ev.step;
            continue;
        }
        if (ev.phase != Phase::act) continue;
        ActEntry e;
        e.step = ev.step;
        e.page_fingerprint = fp_step == ev.step ? fp : std::string();
        e.terminal = ev.payload.value("terminal", false);
        if (ev.payload.contains("error") && ev.payload["error"].is_object()) {
            e.error_code = ev.payload["error"].value("code", "");
        } else if (ev.payload.contains("action") && ev.payload["action"].is_string()) {
            e.action = ev.payload["action"].get<std::string>();
        }
        out.push_back(std::move(e));
    }
    return out;
}

namespace {

TriggerVerdict fire(TriggerSource src, std::string detail, std::vector<int> evidence) {
    return TriggerVerdict{true, src, std::move(detail), std::move(evidence)};
}

}  // namespace

TriggerVerdict evaluate(const Observation& obs, const Trajectory& traj, const TriggerConfig& cfg,
                        const TriggerContext& ctx) {
    const auto acts = act_entries(traj);

    // R1: the last k decisions are the same action on the same page
    if (cfg.loop_k >= 1 && acts.size() >= static_cast<std::size_t>(cfg.loop_k)) {
        auto first = acts.end() - cfg.loop_k;
        bool loop = first->action.has_value();
        for (auto it = first; loop && it != acts.end(); ++it) {
            loop = it->action && *it->action == *first->action && it->page_fingerprint == first->page_fingerprint;
        }
        if (loop) {
            std::vector<int> steps;
            for (auto it = first; it != acts.end(); ++it) steps.push_back(it->step);
            return fire(TriggerSource::rule_loop,
                        std::to_string(cfg.loop_k) + " identical " + *first->action + " on an unchanged page",
                        std::move(steps));
        }
    }

    // R2: step budget exhausted without a stop inside the budget
    int current = obs.step;
    if (!traj.events().empty()) current = std::max(current, traj.events().back().step);
    if (current >= cfg.max_steps) {
        bool stopped = std::any_of(acts.begin(), acts.end(),
                                   [&](const ActEntry& a) { return a.terminal && a.step < cfg.max_steps; });
        if (!stopped) {
            return fire(TriggerSource::rule_budget,
                        "reached step " + std::to_string(current) + " of max_steps " + std::to_string(cfg.max_steps) +
                            " without stop",
                        {current});
        }
    }

    // R3: consecutive unparseable model outputs
    if (cfg.parse_m >= 1) {
        std::vector<int> steps;
        for (auto it = acts.rbegin(); it != acts.rend() && it->error_code == "ParseFailure"; ++it) {
            steps.insert(steps.begin(), it->step);
        }
        if (steps.size() >= static_cast<std::size_t>(cfg.parse_m)) {
            return fire(TriggerSource::rule_parse, std::to_string(steps.size()) + " consecutive parse failures",
                        std::move(steps));
        }
    }

    // R4: the page itself reports an error
    for (const auto& marker : cfg.error_markers) {
        if (!marker.empty() && obs.ax_tree.find(marker) != std::string::npos) {
            return fire(TriggerSource::rule_error_page, "error marker '" + marker + "' on " + obs.url, {obs.step});
        }
    }

    TriggerVerdict quiet;
    if (cfg.semantic_enabled && ctx.semantic && ctx.goal) {
        try {
            auto j = ctx.semantic->judge(*ctx.goal, obs, ctx.belief);
            if (!j.consistent) return fire(TriggerSource::semantic, j.rationale, {obs.step});
        } catch (const std::exception& e) {
            quiet.detail = std::string("semantic evaluator unavailable, rules only: ") + e.what();
        }
    }
    return quiet;
}

// ---- model-backed evaluator ------------------------------------------------

LlmSemanticEvaluator::LlmSemanticEvaluator(std::shared_ptr<llm::ChatModel> model, std::string model_id)
    : model_(std::move(model)), model_id_(std::move(model_id)) {}

SemanticJudgement LlmSemanticEvaluator::judge(const Goal& goal, const Observation& obs, const BeliefState* belief) {
    llm::ChatRequest req;
    req.model_id = model_id_;
    req.messages.push_back(
        {"system",
         "You audit a browser agent. Decide whether the current page and the agent's progress summary are "
         "consistent with the goal. Answer CONSISTENT or INCONSISTENT on the first line, then one line of rationale."});
    std::string user = "goal: " + goal.instruction + "\n\nurl: " + obs.url + "\n\naxtree_txt:\n" +
                       text::utf8_truncate(obs.ax_tree, 4000) + "\n\nsummary:\n";
    user += belief ? render(*belief) : std::string("(none)");
    req.messages.push_back({"user", user});
    auto reply = model_->complete(req).text;
    auto lines = text::split_lines(reply);
    auto verdict = text::to_lower(text::trim(lines.empty() ? "" : lines[0]));
    SemanticJudgement j;
    if (text::starts_with(verdict, "inconsistent")) {
        j.consistent = false;
    } else if (!text::starts_with(verdict, "consistent")) {
        throw Error(ErrorCode::Protocol, "semantic evaluator reply has no verdict", text::utf8_truncate(reply, 200));
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto t = text::trim(lines[i]);
        if (!t.empty()) {
            j.rationale = t;
            break;
        }
    }
    return j;
}

void to_json(json& j, const TriggerVerdict& v) {
    j = json{{"kind", "trigger_verdict"}, {"fired", v.fired}, {"detail", v.detail}, {"evidence", v.evidence}};
    if (v.source) j["source"] = to_string(*v.source);
}

void from_json(const json& j, TriggerVerdict& v) {
    v.fired = j.value("fired", false);
    v.detail = j.value("detail", "");
    v.evidence = j.value("evidence", std::vector<int>{});
    v.source.reset();
    if (j.contains("source")) v.source = parse_trigger_source(j["source"].get<std::string>());
}

}  // namespace tipwise
