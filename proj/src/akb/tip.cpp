#include "tipwise/akb/tip.hpp"

#include <set>

#include "tipwise/core/error.hpp"
#include "tipwise/core/glob.hpp"
#include "tipwise/core/text.hpp"

namespace tipwise {

bool match_url(std::string_view pattern, std::string_view url) {
    return glob_match(pattern, url);
}

void validate_url_pattern(std::string_view pattern) {
    if (!glob_is_valid(pattern)) {
        throw Error(ErrorCode::BadPattern, "invalid url pattern", std::string(pattern));
    }
}

namespace {

[[noreturn]] void invalid(const KnowledgeTip& tip, const std::string& why) {
    throw Error(ErrorCode::InvalidTip, "invalid tip: " + why, tip.id);
}

}  // namespace

void validate_tip(const KnowledgeTip& tip) {
    if (text::trim(tip.id).empty()) invalid(tip, "id is empty");
    if (text::trim(tip.domain_label).empty()) invalid(tip, "domain_label is empty");
    if (text::trim(tip.scope).empty()) invalid(tip, "scope is empty");
    if (text::trim(tip.action_guidance).empty()) invalid(tip, "action_guidance is empty");
    if (tip.url_patterns.empty() && tip.keywords.empty()) {
        invalid(tip, "needs at least one url pattern or keyword");
    }
    for (const auto& p : tip.url_patterns) validate_url_pattern(p);
    std::set<std::string_view> seen;
    for (const auto& k : tip.keywords) {
        auto toks = text::tokenize(k);
        if (toks.size() != 1 || toks[0] != k) {
            invalid(tip, "keyword '" + k + "' must be a single lowercase alphanumeric term");
        }
        if (!seen.insert(k).second) invalid(tip, "duplicate keyword '" + k + "'");
    }
    if (tip.guard) {
        validate_url_pattern(tip.guard->when_url);
        // round-trip through the pattern parser rejects hand-built invalid patterns
        try {
            parse_action_pattern(tip.guard->action.to_string());
        } catch (const Error& e) {
            invalid(tip, std::string("guard action pattern: ") + e.what());
        }
    }
}

std::string tip_text(const KnowledgeTip& tip) {
    std::string out = tip.scope;
    for (const auto* field : {&tip.action_guidance, &tip.constraint, &tip.goal_alignment}) {
        if (field->empty()) continue;
        out += '\n';
        out += *field;
    }
    return out;
}

std::string render_tip(const KnowledgeTip& tip) {
    auto field = [](const std::string& v) { return v.empty() ? std::string("(none)") : v; };
    return "[" + tip.id + "] (" + tip.domain_label + ")\n" +
           "Scope: " + field(tip.scope) + "\n" +
           "Action: " + field(tip.action_guidance) + "\n" +
           "Constraint: " + field(tip.constraint) + "\n" +
           "Goal Alignment: " + field(tip.goal_alignment);
}

std::string_view to_string(Guard::Kind k) {
    return k == Guard::Kind::forbid ? "forbid" : "require";
}

void to_json(json& j, const Guard& g) {
    j = json{{"kind", to_string(g.kind)}, {"when_url", g.when_url}, {"action", g.action.to_string()}};
    if (!g.message.empty()) j["message"] = g.message;
}

void from_json(const json& j, Guard& g) {
    auto kind = j.at("kind").get<std::string>();
    if (kind == "forbid") {
        g.kind = Guard::Kind::forbid;
    } else if (kind == "require") {
        g.kind = Guard::Kind::require;
    } else {
        throw Error(ErrorCode::InvalidTip, "guard kind must be forbid or require", kind);
    }
    g.when_url = j.at("when_url").get<std::string>();
    try {
        g.action = parse_action_pattern(j.at("action").get<std::string>());
    } catch (const Error& e) {
        throw Error(ErrorCode::InvalidTip, std::string("guard action pattern: ") + e.what(), e.detail());
    }
    g.message = j.value("message", "");
}

void to_json(json& j, const KnowledgeTip& t) {
    j = json{{"id", t.id},
             {"domain_label", t.domain_label},
             {"scope", t.scope},
             {"action_guidance", t.action_guidance},
             {"constraint", t.constraint},
             {"goal_alignment", t.goal_alignment},
             {"url_patterns", t.url_patterns},
             {"keywords", t.keywords},
             {"created_at", t.created_at}};
    if (t.guard) j["guard"] = *t.guard;
    if (t.source_failure_id) j["source_failure_id"] = *t.source_failure_id;
}

void from_json(const json& j, KnowledgeTip& t) {
    t.id = j.at("id").get<std::string>();
    t.domain_label = j.value("domain_label", "");
    t.scope = j.value("scope", "");
    t.action_guidance = j.value("action_guidance", "");
    t.constraint = j.value("constraint", "");
    t.goal_alignment = j.value("goal_alignment", "");
    t.url_patterns = j.value("url_patterns", std::vector<std::string>{});
    t.keywords = j.value("keywords", std::vector<std::string>{});
    t.created_at = j.value("created_at", "");
    t.guard.reset();
    t.source_failure_id.reset();
    if (j.contains("guard") && !j.at("guard").is_null()) t.guard = j.at("guard").get<Guard>();
    if (j.contains("source_failure_id") && !j.at("source_failure_id").is_null()) {
        t.source_failure_id = j.at("source_failure_id").get<std::string>();
    }
}

}  // namespace tipwise
