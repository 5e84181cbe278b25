#include "tipwise/env/session.hpp"

#include <algorithm>

#include "tipwise/action/calculator.hpp"
#include "tipwise/core/error.hpp"
#include "tipwise/core/text.hpp"

namespace tipwise {

void to_json(json& j, const EnvResult& r) {
    j = json{{"kind", "env_result"}, {"ok", r.ok}, {"changed", r.changed}, {"note", r.note}, {"url", r.url}};
    if (r.value) j["value"] = *r.value;
}

void from_json(const json& j, EnvResult& r) {
    r.ok = j.value("ok", true);
    r.changed = j.value("changed", false);
    r.note = j.value("note", "");
    r.url = j.value("url", "");
    r.value.reset();
    if (j.contains("value") && j["value"].is_string()) r.value = j["value"].get<std::string>();
}

// ---- session base ------------------------------------------------------------

Observation Session::observe(int step, std::size_t ax_tree_max_chars) { return do_observe(step, ax_tree_max_chars); }

EnvResult Session::step(const Action& a) {
    if (const auto* n = std::get_if<TakeNote>(&a)) {
        notes_.push_back(n->text);
        return EnvResult{true, false, "noted", std::nullopt, current_url()};
    }
    if (const auto* c = std::get_if<Calculate>(&a)) {
        EnvResult r{true, false, "", std::nullopt, current_url()};
        try {
            r.value = format_number(eval_calculate(c->expr));
            r.note = c->expr + " = " + *r.value;
        } catch (const Error& e) {
            r.ok = false;
            r.note = std::string(to_string(e.code())) + ": " + e.what();
        }
        return r;
    }
    if (std::holds_alternative<Stop>(a)) return EnvResult{true, false, "stopped", std::nullopt, current_url()};
    return do_step(a);
}

// ---- mock server ---------------------------------------------------------------

MockSite::MockSite(SiteSpec spec, FaultPlan faults)
    : spec_(std::move(spec)), faults_(std::move(faults)), state_(spec_.state_vars) {}

json MockSite::state() const {
    std::lock_guard lk(mu_);
    return state_;
}

int MockSite::calls() const {
    std::lock_guard lk(mu_);
    return calls_;
}

void MockSite::tick() {
    std::lock_guard lk(mu_);
    ++calls_;
    if (faults_.fail_calls.count(calls_)) {
        throw Error(faults_.code, "injected fault", "call " + std::to_string(calls_));
    }
}

// ---- mock session ----------------------------------------------------------------

namespace {

bool holds(const StateCondition& c, const json& state) {
    for (const auto& [k, v] : c) {
        if (!state.contains(k) || state[k] != v) return false;
    }
    return true;
}

std::string origin_of(std::string_view url) {
    auto scheme = url.find("://");
    if (scheme == std::string_view::npos) return {};
    auto slash = url.find('/', scheme + 3);
    return std::string(url.substr(0, slash));
}

}  // namespace

MockSession::MockSession(std::shared_ptr<MockSite> site) : site_(std::move(site)) {
    tabs_.push_back(Tab{{resolve(site_->spec().initial_page, {})}, 0});
}

MockSession::Location MockSession::resolve(const std::string& page, std::map<std::string, std::string> params) const {
    const auto* p = site_->spec().page(page);
    std::lock_guard lk(site_->mu_);
    return Location{page, params, interpolate(p->url_template, params, site_->state_)};
}

std::optional<MockSession::Location> MockSession::locate(const std::string& url) const {
    for (const auto& p : site_->spec().pages) {
        if (auto caps = match_url_template(p.url_template, url)) return Location{p.id, *caps, url};
    }
    const auto* initial = site_->spec().page(site_->spec().initial_page);
    auto origin = origin_of(initial->url_template);
    if (!origin.empty() && (url == origin || text::starts_with(url, origin + "/"))) {
        return Location{std::string(kNotFoundPage), {}, url};
    }
    return std::nullopt;
}

std::vector<const ElementSpec*> MockSession::visible(const PageSpec& p) const {
    std::vector<const ElementSpec*> out;
    std::lock_guard lk(site_->mu_);
    for (const auto& e : p.elements) {
        if (!holds(e.show_if, site_->state_)) continue;
        if (!e.hide_if.empty() && holds(e.hide_if, site_->state_)) continue;
        out.push_back(&e);
    }
    return out;
}

std::string MockSession::render_tree(const Location& loc, std::vector<Mark>* marks) const {
    if (loc.page == kNotFoundPage) {
        return "RootWebArea '404 Not Found'\n\tStaticText 'The page you requested was not found.'";
    }
    const auto* p = site_->spec().page(loc.page);
    const json state = site_->state();
    std::string out = "RootWebArea '" + interpolate(p->title, loc.params, state) + "'";
    if (tabs_.size() > 1) {
        out += "\n\tStaticText 'Tab " + std::to_string(active_) + " of " + std::to_string(tabs_.size()) + "'";
    }
    for (const auto* e : visible(*p)) {
        auto name = interpolate(e->name, loc.params, state);
        if (!e->bid) {
            out += "\n\t" + e->role + " '" + name + "'";
            continue;
        }
        out += "\n\t[" + *e->bid + "] " + e->role + " '" + name + "'";
        if (e->field) {
            auto v = display(state.value(*e->field, json()));
            if (!v.empty()) out += " value='" + v + "'";
        }
        if (!e->enabled) out += " disabled";
        if (marks) marks->push_back(Mark{*e->bid, e->role, name, e->enabled});
    }
    return out;
}

Observation MockSession::do_observe(int step, std::size_t cap) {
    if (lost_) throw Error(ErrorCode::SessionLost, "mock session lost");
    try {
        site_->tick();
    } catch (const Error&) {
        lost_ = true;
        throw;
    }
    std::vector<Mark> marks;
    const auto& loc = tabs_[active_].here();
    auto tree = render_tree(loc, &marks);
    return make_observation(step, loc.url, std::move(tree), std::move(marks), cap);
}

std::string MockSession::current_url() const { return tabs_[active_].here().url; }

json MockSession::final_state() const {
    const auto& loc = tabs_[active_].here();
    return json{{"url", loc.url},
                {"page", loc.page},
                {"state_vars", site_->state()},
                {"page_text", render_tree(loc, nullptr)}};
}

void MockSession::navigate(Location loc) {
    auto& tab = tabs_[active_];
    tab.history.resize(tab.pos + 1);
    tab.history.push_back(std::move(loc));
    tab.pos = tab.history.size() - 1;
}

EnvResult MockSession::result(bool ok, bool changed, std::string note) const {
    return EnvResult{ok, changed, std::move(note), std::nullopt, current_url()};
}

void MockSession::apply_effects(const Transition& t, const std::string& typed) {
    auto params = tabs_[active_].here().params;
    params["$text"] = typed;
    std::lock_guard lk(site_->mu_);
    auto& state = site_->state_;
    for (const auto& e : t.effects) {
        switch (e.op) {
            case Effect::Op::set:
                if (e.from) {
                    state[e.var] = state[*e.from];
                } else {
                    state[e.var] = e.value.is_string() ? json(interpolate(e.value.get<std::string>(), params, state))
                                                       : e.value;
                }
                break;
            case Effect::Op::add:
                if (state[e.var].is_number_integer() && e.value.is_number_integer()) {
                    state[e.var] = state[e.var].get<long long>() + e.value.get<long long>();
                } else {
                    state[e.var] = state[e.var].get<double>() + e.value.get<double>();
                }
                break;
            case Effect::Op::set_text:
                state[e.var] = typed;
                break;
            case Effect::Op::append_text: {
                auto extra = e.value.is_string() && !e.value.get<std::string>().empty()
                                 ? interpolate(e.value.get<std::string>(), params, state)
                                 : typed;
                state[e.var] = display(state[e.var]) + extra;
                break;
            }
        }
    }
}

EnvResult MockSession::apply_page_action(const Action& a) {
    const auto loc = tabs_[active_].here();
    const auto* page = site_->spec().page(loc.page);
    bool changed = false;
    std::string typed;

    if (auto bid = target_bid(a)) {
        const ElementSpec* el = nullptr;
        if (page) {
            for (const auto* e : visible(*page)) {
                if (e->bid && *e->bid == *bid) el = e;
            }
        }
        if (!el) throw Error(ErrorCode::InvalidBid, "no element with this bid on the page", std::string(*bid));
        if (!el->enabled) return result(false, false, "element [" + std::string(*bid) + "] is disabled");
        if (const auto* t = std::get_if<Type>(&a)) {
            typed = t->text;
            if (el->field) {
                std::lock_guard lk(site_->mu_);
                auto& slot = site_->state_[*el->field];
                changed = slot != json(typed);
                slot = typed;
            }
        }
    }
    if (!page) return result(true, changed, changed ? "" : "ineffective action on an error page");

    const Transition* hit = nullptr;
    {
        const json state = site_->state();
        for (const auto& t : page->transitions) {
            if (t.on.matches(a) && holds(t.when, state)) {
                hit = &t;
                break;
            }
        }
    }
    if (!hit) return result(true, changed, changed ? "" : "ineffective action: " + serialize(a));

    apply_effects(*hit, typed);
    if (hit->to) {
        auto params = loc.params;
        params["$text"] = typed;
        std::map<std::string, std::string> next;
        const json state = site_->state();
        for (const auto& [k, v] : hit->params) next[k] = interpolate(v, params, state);
        navigate(resolve(*hit->to, std::move(next)));
    }
    return result(true, true, hit->note);
}

EnvResult MockSession::do_step(const Action& a) {
    if (lost_) throw Error(ErrorCode::SessionLost, "mock session lost");
    try {
        site_->tick();
    } catch (const Error&) {
        lost_ = true;
        throw;
    }
    auto& tab = tabs_[active_];
    return std::visit(
        [&](const auto& act) -> EnvResult {
            using T = std::decay_t<decltype(act)>;
            if constexpr (std::is_same_v<T, GoTo>) {
                auto loc = locate(act.url);
                if (!loc) throw Error(ErrorCode::NavigationError, "cannot navigate outside the mock site", act.url);
                bool changed = loc->url != current_url();
                navigate(std::move(*loc));
                return result(true, changed, "");
            } else if constexpr (std::is_same_v<T, GoBack>) {
                if (tab.pos == 0) return result(true, false, "no previous page in history");
                --tab.pos;
                return result(true, true, "");
            } else if constexpr (std::is_same_v<T, GoForward>) {
                if (tab.pos + 1 >= tab.history.size()) return result(true, false, "no next page in history");
                ++tab.pos;
                return result(true, true, "");
            } else if constexpr (std::is_same_v<T, NewTab>) {
                tabs_.push_back(Tab{{resolve(site_->spec().initial_page, {})}, 0});
                active_ = tabs_.size() - 1;
                return result(true, true, "opened tab " + std::to_string(active_));
            } else if constexpr (std::is_same_v<T, TabFocus>) {
                if (act.index < 0 || static_cast<std::size_t>(act.index) >= tabs_.size()) {
                    return result(false, false, "no tab " + std::to_string(act.index));
                }
                bool changed = active_ != static_cast<std::size_t>(act.index);
                active_ = static_cast<std::size_t>(act.index);
                return result(true, changed, "");
            } else if constexpr (std::is_same_v<T, TabClose>) {
                if (tabs_.size() == 1) return result(false, false, "cannot close the last tab");
                tabs_.erase(tabs_.begin() + static_cast<std::ptrdiff_t>(active_));
                active_ = std::min(active_, tabs_.size() - 1);
                return result(true, true, "");
            } else {
                return apply_page_action(act);
            }
        },
        a);
}

// ---- watchdog ----------------------------------------------------------------------

WatchdogSession::WatchdogSession(Factory factory, WatchdogConfig cfg)
    : factory_(std::move(factory)), cfg_(cfg), inner_(factory_()) {
    last_url_ = inner_->current_url();
}

void WatchdogSession::reopen() {
    inner_ = factory_();
    if (!last_url_.empty() && inner_->current_url() != last_url_) inner_->step(GoTo{last_url_});
    inner_->restore_notes(notes());
}

template <typename Fn>
auto WatchdogSession::guarded(Fn&& fn) -> decltype(fn()) {
    int failures = 0;
    bool need_reopen = false;
    for (;;) {
        try {
            if (need_reopen) reopen();
            need_reopen = false;
            auto out = fn();
            last_url_ = inner_->current_url();
            return out;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::SessionLost && e.code() != ErrorCode::Timeout) throw;
            if (++failures > cfg_.max_retries) {
                throw Error(ErrorCode::Unrecoverable,
                            "session could not be restored after " + std::to_string(cfg_.max_retries) + " retries",
                            std::string(to_string(e.code())) + ": " + e.what());
            }
            need_reopen = true;
            ++recoveries_;
        }
    }
}

Observation WatchdogSession::do_observe(int step, std::size_t cap) {
    return guarded([&] { return inner_->observe(step, cap); });
}

EnvResult WatchdogSession::do_step(const Action& a) {
    return guarded([&] { return inner_->step(a); });
}

// ---- evaluation ------------------------------------------------------------------------

std::string_view to_string(EvalMode m) { return m == EvalMode::programmatic ? "programmatic" : "answer_based"; }

void to_json(json& j, const EvalOutcome& o) {
    j = json{{"success", o.success}, {"mode", to_string(o.mode)}, {"detail", o.detail}};
}

std::string normalize_answer(std::string_view s) { return text::to_lower(text::trim(s)); }

namespace {

bool compare(const json& actual, const std::string& op, const json& expected) {
    if (op == "contains") {
        if (actual.is_array()) return std::find(actual.begin(), actual.end(), expected) != actual.end();
        return display(actual).find(display(expected)) != std::string::npos;
    }
    bool numeric = actual.is_number() && expected.is_number();
    if (op == "==" || op == "!=") {
        bool eq = numeric ? actual.get<double>() == expected.get<double>() : actual == expected;
        return op == "==" ? eq : !eq;
    }
    if (!numeric) return false;
    double a = actual.get<double>();
    double b = expected.get<double>();
    if (op == "<") return a < b;
    if (op == "<=") return a <= b;
    if (op == ">") return a > b;
    if (op == ">=") return a >= b;
    throw Error(ErrorCode::InvalidArgument, "unknown check operator", op);
}

}  // namespace

EvalOutcome evaluate_success(const Goal& goal, const std::optional<std::string>& answer, const json& final_state,
                             const std::optional<AnswerSpec>& site_spec) {
    const AnswerSpec* spec = goal.reference_answer ? &*goal.reference_answer : site_spec ? &*site_spec : nullptr;
    if (!spec) throw Error(ErrorCode::SpecMissing, "no answer spec for goal", goal.id);

    EvalOutcome out;
    if (spec->kind == AnswerSpec::Kind::programmatic) {
        out.mode = EvalMode::programmatic;
        std::vector<std::string> failed;
        for (const auto& c : spec->checks) {
            json actual;
            bool present = true;
            if (c.var == "$url") {
                actual = final_state.value("url", "");
            } else if (c.var == "$page") {
                actual = final_state.value("page_text", "");
            } else if (c.var == "$answer") {
                present = answer.has_value();
                if (present) actual = *answer;
            } else {
                const auto& vars = final_state.contains("state_vars") ? final_state["state_vars"] : json::object();
                present = vars.contains(c.var);
                if (present) actual = vars[c.var];
            }
            if (!present || !compare(actual, c.op, c.value)) failed.push_back(c.name);
        }
        out.success = failed.empty();
        out.detail = out.success ? "all " + std::to_string(spec->checks.size()) + " checks passed" : "failed:";
        for (const auto& f : failed) out.detail += " " + f + ";";
        if (!failed.empty()) out.detail.pop_back();
        return out;
    }

    out.mode = EvalMode::answer_based;
    if (!answer) {
        out.detail = "no answer";
        return out;
    }
    auto got = normalize_answer(*answer);
    if (spec->kind == AnswerSpec::Kind::exact) {
        auto want = spec->values.empty() ? std::string() : normalize_answer(spec->values.front());
        out.success = got == want;
        out.detail = out.success ? "exact match" : "expected '" + want + "', got '" + got + "'";
        return out;
    }
    std::vector<std::string> missing;
    for (const auto& v : spec->values) {
        if (got.find(normalize_answer(v)) == std::string::npos) missing.push_back(v);
    }
    out.success = missing.empty();
    out.detail = out.success ? "all required strings present" : "missing:";
    for (const auto& m : missing) out.detail += " '" + m + "'";
    return out;
}

}  // namespace tipwise
