#include <doctest.h>

#include "support/generators.hpp"
#include "support/temp_dir.hpp"
#include "tipwise/core/error.hpp"
#include "tipwise/env/cdp.hpp"
#include "tipwise/env/session.hpp"

using namespace tipwise;
using namespace tipwise::testing;

namespace {

SiteSpec site(const std::string& name) { return load_site_spec(source_dir() / "data/suite/sites" / (name + ".json")); }

std::shared_ptr<MockSite> mock(const std::string& name, FaultPlan plan = {}) {
    return std::make_shared<MockSite>(site(name), std::move(plan));
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

const std::vector<Action>& phoebe_success_path() {
    static const std::vector<Action> path = {Click{"1780"}, Click{"2010"}, Click{"3001"}, Click{"3011"},
                                             Click{"3020"}, Click{"2001"}};
    return path;
}

// Naive evaluator used as the reference for evaluate_success.
bool ref_success(const AnswerSpec& spec, const std::optional<std::string>& answer, const json& vars) {
    auto norm = [](std::string s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
        std::size_t i = 0;
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        s = s.substr(i);
        for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };
    switch (spec.kind) {
        case AnswerSpec::Kind::exact:
            return answer && norm(*answer) == norm(spec.values.at(0));
        case AnswerSpec::Kind::must_include:
            if (!answer) return false;
            for (const auto& v : spec.values) {
                if (norm(*answer).find(norm(v)) == std::string::npos) return false;
            }
            return true;
        case AnswerSpec::Kind::programmatic:
            for (const auto& c : spec.checks) {
                if (!vars.contains(c.var)) return false;
                const auto& a = vars[c.var];
                bool ok = false;
                if (c.op == "==") ok = a == c.value;
                if (c.op == "!=") ok = a != c.value;
                if (c.op == "<") ok = a.is_number() && a.get<double>() < c.value.get<double>();
                if (c.op == ">=") ok = a.is_number() && a.get<double>() >= c.value.get<double>();
                if (!ok) return false;
            }
            return true;
    }
    return false;
}

}  // namespace

TEST_CASE("every shipped site spec validates") {
    int n = 0;
    for (const auto& entry : std::filesystem::directory_iterator(source_dir() / "data/suite/sites")) {
        CHECK_NOTHROW(load_site_spec(entry.path()));
        ++n;
    }
    CHECK(n == 12);
}

TEST_CASE("initial observation lists the declared elements at step 0") {
    MockSession s(mock("admin_phoebe"));
    auto obs = s.observe(0);
    CHECK(obs.step == 0);
    CHECK(obs.url == "http://mock.local/admin/catalog/product/?search=Phoebe%20Zipper%20Sweatshirt");
    std::vector<std::string> bids;
    for (const auto& m : obs.marks) bids.push_back(m.bid);
    CHECK(bids == std::vector<std::string>{"1770", "1773", "1780", "1790"});
    CHECK(obs.ax_tree.rfind("RootWebArea 'Products'\n", 0) == 0);
    CHECK(obs.ax_tree.find("\t[1773] gridcell 'Phoebe Zipper Sweatshirt'") != std::string::npos);
    CHECK(obs.ax_tree.find("\tStaticText '16 records found'") != std::string::npos);
    CHECK(obs == s.observe(0));
}

TEST_CASE("hand-traced variant fixture reaches the new variation") {
    auto srv = mock("admin_phoebe");
    MockSession s(srv);
    auto r = s.step(Click{"1780"});
    CHECK(r.changed);
    CHECK(s.observe(1).ax_tree.rfind("RootWebArea 'Phoebe Zipper Sweatshirt / Products'", 0) == 0);
    s.step(Click{"2010"});
    CHECK(s.current_url() == "http://mock.local/admin/catalog/product/edit/1773/?wizard=configurations");
    s.step(Click{"3001"});
    s.step(Click{"3011"});
    CHECK(srv->state()["wizard_size"] == "S");
    CHECK(srv->state()["wizard_color"] == "Brown");
    s.step(Click{"3020"});
    CHECK(srv->state()["variant_added"] == true);
    auto obs = s.observe(5);
    CHECK(obs.ax_tree.find("WH07-S-Brown Enabled") != std::string::npos);
    auto saved = s.step(Click{"2001"});
    CHECK(saved.note == "You saved the product.");

    Goal g{"t01", "Add a new color option brown to the size S of Phoebe Zipper Sweatshirt", std::nullopt,
           AnswerSpec{AnswerSpec::Kind::must_include, {"WH07-S-Brown", "Enabled"}, {}}};
    auto ok = evaluate_success(g, std::string("SKU \"WH07-S-Brown\", Status \"Enabled\""), s.final_state());
    CHECK(ok.success);
    CHECK(ok.mode == EvalMode::answer_based);
}

TEST_CASE("clicking the name cell is an ineffective action") {
    MockSession s(mock("admin_phoebe"));
    auto before = s.observe(0);
    auto r = s.step(Click{"1773"});
    CHECK(r.ok);
    CHECK_FALSE(r.changed);
    CHECK(r.note.find("ineffective action") != std::string::npos);
    CHECK(s.observe(0) == before);
}

TEST_CASE("take_note and calculate never touch the page") {
    auto srv = mock("admin_phoebe");
    MockSession s(srv);
    auto before = s.observe(0);
    auto r = s.step(Calculate{"2+2"});
    REQUIRE(r.value.has_value());
    CHECK(*r.value == "4");
    CHECK_FALSE(r.changed);
    auto z = s.step(Calculate{"1/0"});
    CHECK_FALSE(z.ok);
    CHECK(z.note.find("DivisionByZero") != std::string::npos);
    s.step(TakeNote{"price 12"});
    CHECK(s.notes() == std::vector<std::string>{"price 12"});
    CHECK(s.observe(0) == before);
    CHECK(srv->calls() == 2);  // only the two observes reached the site
}

TEST_CASE("history, tabs and navigation edge cases") {
    MockSession s(mock("admin_phoebe"));
    auto root = s.step(GoBack{});
    CHECK(root.ok);
    CHECK_FALSE(root.changed);
    CHECK(root.note.find("no previous page") != std::string::npos);

    auto start = s.current_url();
    s.step(Click{"1780"});
    s.step(GoBack{});
    CHECK(s.current_url() == start);
    s.step(GoForward{});
    CHECK(s.current_url() == "http://mock.local/admin/catalog/product/edit/1773/");

    s.step(GoTo{"http://mock.local/admin/nowhere"});
    auto nf = s.observe(3);
    CHECK(nf.ax_tree.find("404 Not Found") != std::string::npos);
    CHECK(nf.marks.empty());
    CHECK(code_of([&] { s.step(GoTo{"https://elsewhere.example/"}); }) == ErrorCode::NavigationError);
    CHECK(code_of([&] { s.step(Click{"1780"}); }) == ErrorCode::InvalidBid);

    s.step(GoTo{"http://mock.local/admin/catalog/product/edit/1773/"});
    CHECK(s.observe(4).ax_tree.find("Edit Configurations") != std::string::npos);

    CHECK(s.step(NewTab{}).changed);
    CHECK(s.current_url() == start);
    CHECK(s.observe(5).ax_tree.find("Tab 1 of 2") != std::string::npos);
    s.step(TabFocus{0});
    CHECK(s.current_url() == "http://mock.local/admin/catalog/product/edit/1773/");
    CHECK_FALSE(s.step(TabFocus{7}).ok);
    s.step(TabClose{});
    CHECK(s.current_url() == start);
    CHECK_FALSE(s.step(TabClose{}).ok);
}

TEST_CASE("typing into a bound field updates server state") {
    auto srv = mock("reddit_post");
    MockSession s(srv);
    s.step(Type{"post_url", "https://x.org", false});
    CHECK(srv->state()["post_url"] == "https://x.org");
    CHECK(s.observe(1).ax_tree.find("[post_url] textbox 'URL' value='https://x.org'") != std::string::npos);
    s.step(Type{"post_url", "", false});
    CHECK(s.observe(2).ax_tree.find("[post_url] textbox 'URL'\n") != std::string::npos);
    s.step(Click{"submit"});
    CHECK(srv->state()["posted"] == 1);
}

TEST_CASE("mock determinism and transition totality on random action streams") {
    Rng rng(31);
    const std::vector<std::string> names = {"admin_phoebe", "reddit_post", "gitlab_commit", "map_route", "gitlab_star"};
    for (int trial = 0; trial < 60; ++trial) {
        const auto& name = pick(rng, names);
        std::vector<Action> actions;
        auto a_site = mock(name);
        MockSession a(a_site);
        std::vector<Observation> stream_a;
        std::vector<json> results_a;
        for (int i = 0; i < 25; ++i) {
            auto obs = a.observe(i);
            stream_a.push_back(obs);
            Action act;
            if (!obs.marks.empty() && coin(rng, 0.7)) {
                const auto& m = pick(rng, obs.marks);
                act = coin(rng) ? Action{Click{m.bid}} : Action{Type{m.bid, random_text(rng, 8), false}};
            } else {
                act = random_action(rng);
                if (auto* g = std::get_if<GoTo>(&act)) g->url = random_url(rng);
            }
            actions.push_back(act);
            try {
                results_a.push_back(json(a.step(act)));
            } catch (const Error& e) {
                REQUIRE((e.code() == ErrorCode::InvalidBid || e.code() == ErrorCode::NavigationError));
                results_a.push_back(json(to_string(e.code())));
            }
        }
        MockSession b(mock(name));
        for (int i = 0; i < 25; ++i) {
            REQUIRE(b.observe(i) == stream_a[static_cast<std::size_t>(i)]);
            json r;
            try {
                r = json(b.step(actions[static_cast<std::size_t>(i)]));
            } catch (const Error& e) {
                r = json(to_string(e.code()));
            }
            REQUIRE(r == results_a[static_cast<std::size_t>(i)]);
        }
        CHECK(a.final_state() == b.final_state());
    }
}

TEST_CASE("site spec validation rejects broken specs") {
    auto base = json::parse(R"js({"v":1,"site_id":"s","initial_page":"a","state_vars":{"x":0},
        "pages":[{"id":"a","url":"http://mock.local/a","elements":[{"bid":"1","role":"button","name":"b"}],
                  "transitions":[{"on":"click(\"1\")","to":"a","effects":[{"add":"x","value":1}]}]}]})js");
    CHECK_NOTHROW(parse_site_spec(base));
    auto broken = [&](auto mutate) {
        auto j = base;
        mutate(j);
        return code_of([&] { parse_site_spec(j); });
    };
    CHECK(broken([](json& j) { j["initial_page"] = "zz"; }) == ErrorCode::InvalidArgument);
    CHECK(broken([](json& j) { j["pages"][0]["transitions"][0]["to"] = "zz"; }) == ErrorCode::InvalidArgument);
    CHECK(broken([](json& j) { j["pages"][0]["transitions"][0]["effects"][0]["add"] = "y"; }) ==
          ErrorCode::InvalidArgument);
    CHECK(broken([](json& j) { j["pages"][0]["elements"].push_back(j["pages"][0]["elements"][0]); }) ==
          ErrorCode::InvalidArgument);
    CHECK(broken([](json& j) { j["pages"][0]["transitions"][0]["on"] = "smash(\"1\")"; }) ==
          ErrorCode::UnknownActionName);
    CHECK(broken([](json& j) { j["pages"][0]["url"] = "/relative"; }) == ErrorCode::InvalidArgument);
}

TEST_CASE("url templates and interpolation") {
    auto caps = match_url_template("http://mock.local/gitlab/{project}/-/edit/{branch}/README.md",
                                   "http://mock.local/gitlab/a11y/-/edit/main/README.md");
    REQUIRE(caps.has_value());
    CHECK((*caps)["project"] == "a11y");
    CHECK((*caps)["branch"] == "main");
    CHECK_FALSE(match_url_template("http://mock.local/a/{x}", "http://mock.local/a/").has_value());
    CHECK_FALSE(match_url_template("http://mock.local/a/{x}", "http://mock.local/a/b/c").has_value());
    CHECK(match_url_template("http://mock.local/m?from={f}&to={t}", "http://mock.local/m?from=A&to=B")->at("t") == "B");
    CHECK(interpolate("{a}-{b}-{missing}", {{"a", "1"}}, json{{"b", 2}}) == "1-2-");
}

TEST_CASE("evaluate_success examples") {
    Goal exact{"g", "How many?", std::nullopt, AnswerSpec{AnswerSpec::Kind::exact, {"812"}, {}}};
    CHECK(evaluate_success(exact, std::string("812"), json::object()).success);
    CHECK(evaluate_success(exact, std::string(" 812 "), json::object()).success);
    CHECK_FALSE(evaluate_success(exact, std::string("8120"), json::object()).success);
    CHECK_FALSE(evaluate_success(exact, std::nullopt, json::object()).success);

    AnswerSpec cart{AnswerSpec::Kind::programmatic, {}, {ProgrammaticCheck{"cart_count == 1", "cart_count", "==", 1}}};
    Goal g{"g", "Add it", std::nullopt, cart};
    auto fail = evaluate_success(g, std::nullopt, json{{"state_vars", {{"cart_count", 0}}}});
    CHECK_FALSE(fail.success);
    CHECK(fail.mode == EvalMode::programmatic);
    CHECK(fail.detail.find("cart_count == 1") != std::string::npos);
    CHECK(evaluate_success(g, std::nullopt, json{{"state_vars", {{"cart_count", 1}}}}).success);

    Goal bare{"g", "x", std::nullopt, std::nullopt};
    CHECK(code_of([&] { evaluate_success(bare, std::string("a"), json::object()); }) == ErrorCode::SpecMissing);
    CHECK(evaluate_success(bare, std::string("812"), json::object(), exact.reference_answer).success);

    AnswerSpec page{AnswerSpec::Kind::programmatic, {}, {ProgrammaticCheck{"on page", "$page", "contains", "Saved"}}};
    Goal pg{"g", "x", std::nullopt, page};
    CHECK(evaluate_success(pg, std::nullopt, json{{"page_text", "RootWebArea 'Saved'"}}).success);
}

TEST_CASE("evaluate_success agrees with a naive evaluator on random specs") {
    Rng rng(77);
    const std::vector<std::string> words = {"812", "WH07-S-Brown", "Enabled", "books", "main", "Sony"};
    for (int trial = 0; trial < 3000; ++trial) {
        AnswerSpec spec;
        spec.kind = static_cast<AnswerSpec::Kind>(uniform(rng, 0, 2));
        json vars = json::object();
        for (const auto& v : {"a", "b", "c"}) {
            if (coin(rng, 0.8)) vars[v] = coin(rng) ? json(static_cast<int>(uniform(rng, 0, 3))) : json(pick(rng, words));
        }
        if (spec.kind == AnswerSpec::Kind::exact) {
            spec.values = {pick(rng, words)};
        } else if (spec.kind == AnswerSpec::Kind::must_include) {
            for (std::size_t i = 0; i < uniform(rng, 1, 3); ++i) spec.values.push_back(pick(rng, words));
        } else {
            static const std::vector<std::string> ops = {"==", "!=", "<", ">="};
            for (std::size_t i = 0; i < uniform(rng, 1, 3); ++i) {
                json value = coin(rng) ? json(static_cast<int>(uniform(rng, 0, 3))) : json(pick(rng, words));
                const auto& op = pick(rng, ops);
                if (op == "<" || op == ">=") value = static_cast<int>(uniform(rng, 0, 3));
                spec.checks.push_back({"c" + std::to_string(i), std::string(1, static_cast<char>('a' + uniform(rng, 0, 2))),
                                       op, value});
            }
        }
        std::optional<std::string> answer;
        if (coin(rng, 0.9)) {
            answer = coin(rng) ? std::string(" ") : std::string();
            for (std::size_t i = 0; i < uniform(rng, 0, 3); ++i) {
                auto w = pick(rng, words);
                if (coin(rng)) for (auto& c : w) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
                *answer += w + (coin(rng) ? ", " : "");
            }
        }
        Goal g{"g", "x", std::nullopt, spec};
        auto got = evaluate_success(g, answer, json{{"state_vars", vars}});
        REQUIRE(got.success == ref_success(spec, answer, vars));
    }
}

TEST_CASE("watchdog: one transient fault leaves the same final state as the baseline") {
    auto run = [](FaultPlan plan, int* recoveries) {
        auto srv = mock("admin_phoebe", std::move(plan));
        WatchdogSession s([srv] { return std::make_unique<MockSession>(srv); });
        s.step(TakeNote{"started"});
        int step = 0;
        for (const auto& a : phoebe_success_path()) {
            s.observe(step++);
            s.step(a);
        }
        s.observe(step);
        *recoveries = s.recoveries();
        CHECK(s.notes() == std::vector<std::string>{"started"});
        return s.final_state();
    };
    int r0 = 0;
    auto baseline = run({}, &r0);
    CHECK(r0 == 0);
    for (int at : {1, 4, 7, 10, 13}) {
        for (auto code : {ErrorCode::SessionLost, ErrorCode::Timeout}) {
            int r = 0;
            auto faulted = run(FaultPlan{{at}, code}, &r);
            CHECK(r == 1);
            CHECK(faulted == baseline);
        }
    }
}

TEST_CASE("watchdog: r+1 consecutive faults are Unrecoverable") {
    auto srv = mock("admin_phoebe", FaultPlan{{2, 3, 4}, ErrorCode::SessionLost});
    WatchdogSession s([srv] { return std::make_unique<MockSession>(srv); }, WatchdogConfig{2});
    s.observe(0);
    CHECK(code_of([&] { s.step(Click{"1780"}); }) == ErrorCode::Unrecoverable);

    auto srv2 = mock("admin_phoebe", FaultPlan{{2, 3}, ErrorCode::SessionLost});
    WatchdogSession s2([srv2] { return std::make_unique<MockSession>(srv2); }, WatchdogConfig{2});
    s2.observe(0);
    CHECK_NOTHROW(s2.step(Click{"1780"}));
    CHECK(s2.recoveries() == 2);
}

TEST_CASE("watchdog without faults is a pass-through") {
    auto a = mock("gitlab_commit");
    auto b = mock("gitlab_commit");
    MockSession plain(a);
    WatchdogSession wrapped([b] { return std::make_unique<MockSession>(b); });
    const std::vector<Action> path = {Click{"401"}, Type{"content", "fixed", false}, Click{"commit"}};
    for (std::size_t i = 0; i < path.size(); ++i) {
        CHECK(plain.observe(static_cast<int>(i)) == wrapped.observe(static_cast<int>(i)));
        CHECK(json(plain.step(path[i])) == json(wrapped.step(path[i])));
    }
    CHECK(plain.final_state() == wrapped.final_state());
    CHECK(a->calls() == b->calls());
}

TEST_CASE("browser adapter against a dead endpoint is SessionLost") {
    CdpConfig cfg;
    cfg.endpoint = "http://127.0.0.1:1";
    cfg.command_timeout_ms = 500;
    CHECK(code_of([&] { CdpSession s(cfg); }) == ErrorCode::SessionLost);
}
