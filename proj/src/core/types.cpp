#include "tipwise/core/types.hpp"

#include <set>

#include "tipwise/core/digest.hpp"
#include "tipwise/core/error.hpp"
#include "tipwise/core/text.hpp"

namespace tipwise {

const Mark* Observation::find_mark(std::string_view bid) const {
    for (const auto& m : marks) {
        if (m.bid == bid) return &m;
    }
    return nullptr;
}

Observation make_observation(int step, std::string url, std::string ax_tree,
                             std::vector<Mark> marks, std::size_t ax_tree_cap,
                             std::optional<std::string> screenshot_ref) {
    if (step < 0) {
        throw Error(ErrorCode::InvalidArgument, "observation step must be non-negative");
    }
    std::set<std::string_view> seen;
    for (const auto& m : marks) {
        if (!seen.insert(m.bid).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate bid in observation", m.bid);
        }
    }
    if (ax_tree_cap > 0 && ax_tree.size() > ax_tree_cap) {
        ax_tree = text::utf8_truncate(ax_tree, ax_tree_cap);
    }
    Observation obs;
    obs.step = step;
    obs.page_fingerprint = fingerprint(url, ax_tree);
    obs.url = std::move(url);
    obs.ax_tree = std::move(ax_tree);
    obs.marks = std::move(marks);
    obs.screenshot_ref = std::move(screenshot_ref);
    return obs;
}

std::string_view to_string(AblationMode mode) {
    switch (mode) {
        case AblationMode::full: return "full";
        case AblationMode::no_knowledge: return "no_knowledge";
        case AblationMode::no_summarizer: return "no_summarizer";
        case AblationMode::vanilla: return "vanilla";
    }
    return "full";
}

AblationMode parse_ablation_mode(std::string_view s) {
    if (s == "full") return AblationMode::full;
    if (s == "no_knowledge") return AblationMode::no_knowledge;
    if (s == "no_summarizer") return AblationMode::no_summarizer;
    if (s == "vanilla") return AblationMode::vanilla;
    throw Error(ErrorCode::InvalidArgument, "unknown ablation mode", std::string(s));
}

void RunConfig::validate() const {
    if (max_steps < 1) {
        throw Error(ErrorCode::InvalidArgument, "max_steps must be >= 1");
    }
    if (belief_budget_chars < 512) {
        throw Error(ErrorCode::InvalidArgument, "belief_budget_chars must be >= 512");
    }
    if (retrieve_limit < 1) {
        throw Error(ErrorCode::InvalidArgument, "retrieve_limit must be >= 1");
    }
    if (parse_retries < 0) {
        throw Error(ErrorCode::InvalidArgument, "parse_retries must be >= 0");
    }
}

void to_json(json& j, const ProgrammaticCheck& c) {
    j = json{{"name", c.name}, {"var", c.var}, {"op", c.op}, {"value", c.value}};
}

void from_json(const json& j, ProgrammaticCheck& c) {
    c.name = j.value("name", "");
    c.var = j.at("var").get<std::string>();
    c.op = j.value("op", "==");
    c.value = j.contains("value") ? j.at("value") : json();
    if (c.name.empty()) c.name = c.var + " " + c.op + " " + c.value.dump();
}

namespace {

std::string_view kind_name(AnswerSpec::Kind k) {
    switch (k) {
        case AnswerSpec::Kind::exact: return "exact";
        case AnswerSpec::Kind::must_include: return "must_include";
        case AnswerSpec::Kind::programmatic: return "programmatic";
    }
    return "exact";
}

}  // namespace

void to_json(json& j, const AnswerSpec& s) {
    j = json{{"kind", kind_name(s.kind)}};
    if (s.kind == AnswerSpec::Kind::programmatic) {
        j["checks"] = s.checks;
    } else {
        j["values"] = s.values;
    }
}

void from_json(const json& j, AnswerSpec& s) {
    auto kind = j.at("kind").get<std::string>();
    if (kind == "exact") {
        s.kind = AnswerSpec::Kind::exact;
    } else if (kind == "must_include") {
        s.kind = AnswerSpec::Kind::must_include;
    } else if (kind == "programmatic") {
        s.kind = AnswerSpec::Kind::programmatic;
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown answer spec kind", kind);
    }
    s.values.clear();
    s.checks.clear();
    if (j.contains("value")) s.values.push_back(j.at("value").get<std::string>());
    if (j.contains("values")) {
        for (const auto& v : j.at("values")) s.values.push_back(v.get<std::string>());
    }
    if (j.contains("checks")) s.checks = j.at("checks").get<std::vector<ProgrammaticCheck>>();
}

void to_json(json& j, const Goal& g) {
    j = json{{"id", g.id}, {"instruction", g.instruction}};
    if (g.site_hint) j["site_hint"] = *g.site_hint;
    if (g.reference_answer) j["reference_answer"] = *g.reference_answer;
}

void from_json(const json& j, Goal& g) {
    g.id = j.at("id").get<std::string>();
    g.instruction = j.at("instruction").get<std::string>();
    if (g.instruction.empty()) {
        throw Error(ErrorCode::InvalidArgument, "goal instruction is empty", g.id);
    }
    g.site_hint.reset();
    g.reference_answer.reset();
    if (j.contains("site_hint") && !j.at("site_hint").is_null()) {
        g.site_hint = j.at("site_hint").get<std::string>();
    }
    if (j.contains("reference_answer") && !j.at("reference_answer").is_null()) {
        g.reference_answer = j.at("reference_answer").get<AnswerSpec>();
    }
}

void to_json(json& j, const Mark& m) {
    j = json{{"bid", m.bid}, {"role", m.role}, {"name", m.name}, {"enabled", m.enabled}};
}

void from_json(const json& j, Mark& m) {
    m.bid = j.at("bid").get<std::string>();
    m.role = j.value("role", "");
    m.name = j.value("name", "");
    m.enabled = j.value("enabled", true);
}

void to_json(json& j, const Observation& o) {
    j = json{{"kind", "observation"},
             {"step", o.step},
             {"url", o.url},
             {"ax_tree", o.ax_tree},
             {"marks", o.marks},
             {"page_fingerprint", o.page_fingerprint}};
    if (o.screenshot_ref) j["screenshot_ref"] = *o.screenshot_ref;
}

void from_json(const json& j, Observation& o) {
    o.step = j.at("step").get<int>();
    o.url = j.at("url").get<std::string>();
    o.ax_tree = j.at("ax_tree").get<std::string>();
    o.marks = j.at("marks").get<std::vector<Mark>>();
    o.page_fingerprint = j.at("page_fingerprint").get<std::string>();
    o.screenshot_ref.reset();
    if (j.contains("screenshot_ref")) o.screenshot_ref = j.at("screenshot_ref").get<std::string>();
}

}  // namespace tipwise
