#include "tipwise/env/site_spec.hpp"

#include <set>

#include "tipwise/core/error.hpp"
#include "tipwise/core/fs.hpp"

namespace tipwise {

const PageSpec* SiteSpec::page(std::string_view id) const {
    for (const auto& p : pages) {
        if (p.id == id) return &p;
    }
    return nullptr;
}

std::string display(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "";
    if (v.is_number_float()) {
        double d = v.get<double>();
        if (d == static_cast<double>(static_cast<long long>(d))) return std::to_string(static_cast<long long>(d));
    }
    return v.dump();
}

std::string interpolate(std::string_view tmpl, const std::map<std::string, std::string>& params, const json& vars) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        auto open = tmpl.find('{', i);
        if (open == std::string_view::npos) break;
        auto close = tmpl.find('}', open);
        if (close == std::string_view::npos) break;
        out.append(tmpl.substr(i, open - i));
        std::string name(tmpl.substr(open + 1, close - open - 1));
        if (auto it = params.find(name); it != params.end()) {
            out += it->second;
        } else if (vars.is_object() && vars.contains(name)) {
            out += display(vars[name]);
        }
        i = close + 1;
    }
    out.append(tmpl.substr(i));
    return out;
}

std::optional<std::map<std::string, std::string>> match_url_template(std::string_view tmpl, std::string_view url) {
    std::map<std::string, std::string> caps;
    std::size_t t = 0;
    std::size_t u = 0;
    while (t < tmpl.size()) {
        if (tmpl[t] == '{') {
            auto close = tmpl.find('}', t);
            if (close == std::string_view::npos) return std::nullopt;
            std::string name(tmpl.substr(t + 1, close - t - 1));
            t = close + 1;
            // a capture runs to the next literal of the template or a url delimiter
            std::size_t end = u;
            while (end < url.size() && url[end] != '/' && url[end] != '?' && url[end] != '&' && url[end] != '#' &&
                   (t >= tmpl.size() || url[end] != tmpl[t])) {
                ++end;
            }
            if (end == u) return std::nullopt;
            caps[name] = std::string(url.substr(u, end - u));
            u = end;
            continue;
        }
        if (u >= url.size() || url[u] != tmpl[t]) return std::nullopt;
        ++t;
        ++u;
    }
    if (u != url.size()) return std::nullopt;
    return caps;
}

namespace {

StateCondition parse_condition(const json& j) {
    StateCondition c;
    if (j.is_null()) return c;
    for (const auto& [k, v] : j.items()) c[k] = v;
    return c;
}

Effect parse_effect(const json& j) {
    Effect e;
    if (j.contains("set_text")) {
        e.op = Effect::Op::set_text;
        e.var = j.at("set_text").get<std::string>();
    } else if (j.contains("add")) {
        e.op = Effect::Op::add;
        e.var = j.at("add").get<std::string>();
        e.value = j.value("value", json(1));
    } else if (j.contains("append_text")) {
        e.op = Effect::Op::append_text;
        e.var = j.at("append_text").get<std::string>();
        e.value = j.value("value", json(""));
    } else if (j.contains("set")) {
        e.op = Effect::Op::set;
        e.var = j.at("set").get<std::string>();
        if (j.contains("from")) {
            e.from = j.at("from").get<std::string>();
        } else {
            e.value = j.at("value");
        }
    } else {
        throw Error(ErrorCode::InvalidArgument, "effect needs set, add, set_text or append_text", j.dump());
    }
    return e;
}

ElementSpec parse_element(const json& j) {
    ElementSpec e;
    if (j.contains("bid")) e.bid = j.at("bid").get<std::string>();
    e.role = j.value("role", e.bid ? "button" : "StaticText");
    e.name = j.value("name", "");
    if (j.contains("field")) e.field = j.at("field").get<std::string>();
    e.enabled = j.value("enabled", true);
    if (j.contains("show_if")) e.show_if = parse_condition(j["show_if"]);
    if (j.contains("hide_if")) e.hide_if = parse_condition(j["hide_if"]);
    return e;
}

Transition parse_transition(const json& j) {
    Transition t;
    t.on = parse_action_pattern(j.at("on").get<std::string>());
    if (j.contains("if")) t.when = parse_condition(j["if"]);
    if (j.contains("to")) t.to = j.at("to").get<std::string>();
    if (j.contains("params")) {
        for (const auto& [k, v] : j["params"].items()) t.params[k] = v.get<std::string>();
    }
    if (j.contains("effects")) {
        for (const auto& e : j["effects"]) t.effects.push_back(parse_effect(e));
    }
    t.note = j.value("note", "");
    return t;
}

[[noreturn]] void invalid(const std::string& site, const std::string& what) {
    throw Error(ErrorCode::InvalidArgument, "invalid site spec " + site + ": " + what, what);
}

}  // namespace

SiteSpec parse_site_spec(const json& j) {
    SiteSpec s;
    try {
        s.v = j.value("v", 1);
        s.site_id = j.at("site_id").get<std::string>();
        s.initial_page = j.at("initial_page").get<std::string>();
        s.state_vars = j.value("state_vars", json::object());
        s.url_templates = j.value("url_templates", std::vector<std::string>{});
        for (const auto& pj : j.at("pages")) {
            PageSpec p;
            p.id = pj.at("id").get<std::string>();
            p.url_template = pj.at("url").get<std::string>();
            p.title = pj.value("title", p.id);
            if (pj.contains("elements")) {
                for (const auto& e : pj["elements"]) p.elements.push_back(parse_element(e));
            }
            if (pj.contains("transitions")) {
                for (const auto& t : pj["transitions"]) p.transitions.push_back(parse_transition(t));
            }
            s.pages.push_back(std::move(p));
        }
        if (j.contains("validators")) s.validators = j["validators"].get<std::vector<ProgrammaticCheck>>();
        if (j.contains("answer_spec")) s.answer_spec = j["answer_spec"].get<AnswerSpec>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, "malformed site spec", e.what());
    }
    validate(s);
    return s;
}

SiteSpec load_site_spec(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(fs::read_file(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidArgument, "site spec is not json", path.string() + ": " + e.what());
    }
    return parse_site_spec(j);
}

void validate(const SiteSpec& s) {
    if (s.v != 1) invalid(s.site_id, "unsupported version " + std::to_string(s.v));
    if (s.site_id.empty()) invalid(s.site_id, "empty site_id");
    if (!s.state_vars.is_object()) invalid(s.site_id, "state_vars must be an object");
    if (!s.page(s.initial_page)) invalid(s.site_id, "initial_page '" + s.initial_page + "' does not exist");
    auto declared = [&](const std::string& var) {
        if (!s.state_vars.contains(var)) invalid(s.site_id, "undeclared state var '" + var + "'");
    };
    auto check_cond = [&](const StateCondition& c) {
        for (const auto& [k, v] : c) declared(k);
    };
    std::set<std::string> ids;
    for (const auto& p : s.pages) {
        if (!ids.insert(p.id).second) invalid(s.site_id, "duplicate page id '" + p.id + "'");
        if (p.url_template.find("://") == std::string::npos) {
            invalid(s.site_id, "page '" + p.id + "' url is not absolute");
        }
        std::set<std::string> bids;
        for (const auto& e : p.elements) {
            if (e.bid) {
                if (e.bid->empty() || e.bid->find_first_of(" \t\r\n") != std::string::npos) {
                    invalid(s.site_id, "bad bid on page '" + p.id + "'");
                }
                if (!bids.insert(*e.bid).second) invalid(s.site_id, "duplicate bid " + *e.bid + " on '" + p.id + "'");
            }
            if (e.field) declared(*e.field);
            check_cond(e.show_if);
            check_cond(e.hide_if);
        }
        for (const auto& t : p.transitions) {
            if (t.to && !s.page(*t.to)) invalid(s.site_id, "transition to unknown page '" + *t.to + "'");
            check_cond(t.when);
            for (const auto& e : t.effects) {
                declared(e.var);
                if (e.from) declared(*e.from);
                if (e.op == Effect::Op::add && !e.value.is_number()) invalid(s.site_id, "add effect needs a number");
            }
        }
    }
    for (const auto& c : s.validators) {
        if (!c.var.starts_with("$")) declared(c.var);
    }
}

}  // namespace tipwise
