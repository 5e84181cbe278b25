#include <doctest.h>

#include <stdexcept>

#include "support/generators.hpp"
#include "support/trajectories.hpp"
#include "tipwise/trigger/trigger.hpp"

using namespace tipwise;
using namespace tipwise::testing;

namespace {

const std::string kGridUrl = "http://mock.local/admin/catalog/product/?search=Phoebe%20Zipper%20Sweatshirt";
const std::string kGridTree =
    "RootWebArea 'Products'\n"
    "\t[1770] textbox 'Search by keyword' value='Phoebe Zipper Sweatshirt'\n"
    "\tStaticText '16 records found'\n"
    "\t[1773] gridcell 'Phoebe Zipper Sweatshirt'\n"
    "\tStaticText 'Configurable Product'\n"
    "\t[1780] link 'Edit Phoebe Zipper Sweatshirt'";

Observation grid_obs(int step) {
    return make_observation(step, kGridUrl, kGridTree,
                            {{"1770", "textbox", "Search by keyword", true},
                             {"1773", "gridcell", "Phoebe Zipper Sweatshirt", true},
                             {"1780", "link", "Edit Phoebe Zipper Sweatshirt", true}});
}

class Throwing final : public SemanticEvaluator {
public:
    SemanticJudgement judge(const Goal&, const Observation&, const BeliefState*) override {
        throw std::runtime_error("evaluator offline");
    }
};

class Inconsistent final : public SemanticEvaluator {
public:
    SemanticJudgement judge(const Goal&, const Observation&, const BeliefState*) override {
        return {false, "page unrelated to goal"};
    }
};

}  // namespace

TEST_CASE("fresh trajectory at step 0 does not fire") {
    Trajectory t("g");
    auto obs = grid_obs(0);
    t.append(observe_event(obs));
    auto v = evaluate(obs, t, TriggerConfig{});
    CHECK_FALSE(v.fired);
    CHECK_FALSE(v.source.has_value());
}

TEST_CASE("loop fixture fires rule_loop exactly when the third identical click completes") {
    Trajectory t("phoebe");
    TriggerConfig cfg;
    for (int step = 0; step < 3; ++step) {
        auto obs = grid_obs(step);
        t.append(observe_event(obs));
        auto before = evaluate(obs, t, cfg);
        CHECK_FALSE(before.fired);
        t.append(act_event(step, Click{"1773"}));
        t.append(env_event(step, false));
        auto after = evaluate(obs, t, cfg);
        if (step < 2) {
            CHECK_FALSE(after.fired);
        } else {
            REQUIRE(after.fired);
            CHECK(*after.source == TriggerSource::rule_loop);
            CHECK(after.evidence == std::vector<int>{0, 1, 2});
        }
    }
}

TEST_CASE("changed page fingerprint breaks the loop") {
    Trajectory t("g");
    for (int step = 0; step < 3; ++step) {
        auto obs = grid_obs(step);
        if (step == 1) obs = make_observation(step, kGridUrl, kGridTree + "\n\tStaticText 'modal'", obs.marks);
        t.append(observe_event(obs));
        t.append(act_event(step, Click{"1773"}));
    }
    CHECK_FALSE(evaluate(grid_obs(2), t, TriggerConfig{}).fired);
}

TEST_CASE("R1 agrees with a brute-force window scan on 500 random trajectories") {
    Rng rng(4242);
    const std::vector<Action> palette = {Click{"1"}, Click{"2"}, Type{"3", "x", false}, Scroll{}};
    const std::vector<std::string> trees = {"RootWebArea 'A'", "RootWebArea 'B'"};
    int fired_total = 0;
    for (int trial = 0; trial < 500; ++trial) {
        TriggerConfig cfg;
        cfg.loop_k = static_cast<int>(uniform(rng, 2, 4));
        cfg.max_steps = 1000;
        cfg.parse_m = 1000;
        const int len = static_cast<int>(uniform(rng, 1, 14));
        std::vector<std::pair<std::string, std::string>> pairs;
        std::vector<bool> ok;
        Trajectory t("r");
        std::optional<int> first_fire;
        for (int step = 0; step < len; ++step) {
            auto obs = make_observation(step, "http://mock.local/x", pick(rng, trees), {});
            t.append(observe_event(obs));
            if (coin(rng, 0.1)) {
                t.append(act_error_event(step, ErrorCode::GroundingFailure));
                pairs.emplace_back("", obs.page_fingerprint);
                ok.push_back(false);
            } else {
                const auto& a = pick(rng, palette);
                t.append(act_event(step, a));
                pairs.emplace_back(serialize(a), obs.page_fingerprint);
                ok.push_back(true);
            }
            auto v = evaluate(obs, t, cfg);
            bool loop = v.fired && *v.source == TriggerSource::rule_loop;
            // evaluate sees only the trailing window; the oracle scans every window ending here
            auto ref_here = ref_first_loop(
                std::vector(pairs.end() - std::min<std::size_t>(pairs.size(), cfg.loop_k), pairs.end()),
                std::vector<bool>(ok.end() - std::min<std::size_t>(ok.size(), cfg.loop_k), ok.end()), cfg.loop_k);
            CHECK(loop == ref_here.has_value());
            if (loop && !first_fire) first_fire = step;
        }
        CHECK(first_fire == ref_first_loop(pairs, ok, cfg.loop_k));
        if (first_fire) ++fired_total;
    }
    CHECK(fired_total > 50);
}

TEST_CASE("budget rule fires at step max_steps without stop and stays fired") {
    TriggerConfig cfg;
    Trajectory t("g");
    for (int step = 0; step < 30; ++step) {
        auto obs = make_observation(step, "http://mock.local/x/" + std::to_string(step), "RootWebArea 'p'", {});
        t.append(observe_event(obs));
        t.append(act_event(step, Scroll{ScrollDirection::down, step + 1}));
        CHECK_FALSE(evaluate(obs, t, cfg).fired);
    }
    for (int step = 30; step < 35; ++step) {
        auto obs = make_observation(step, "http://mock.local/y", "RootWebArea 'p'", {});
        t.append(observe_event(obs));
        auto v = evaluate(obs, t, cfg);
        REQUIRE(v.fired);
        CHECK(*v.source == TriggerSource::rule_budget);
        t.append(act_event(step, Scroll{ScrollDirection::up, step}));
    }
}

TEST_CASE("a stop inside the budget keeps R2 quiet") {
    TriggerConfig cfg;
    cfg.max_steps = 3;
    Trajectory t("g");
    for (int step = 0; step < 3; ++step) {
        auto obs = make_observation(step, "http://mock.local/" + std::to_string(step), "RootWebArea 'p'", {});
        t.append(observe_event(obs));
        if (step == 2) {
            t.append(act_event(step, Stop{"done"}));
        } else {
            t.append(act_event(step, GoTo{"http://mock.local/" + std::to_string(step + 1)}));
        }
    }
    CHECK_FALSE(evaluate(make_observation(3, "http://mock.local/3", "RootWebArea 'p'", {}), t, cfg).fired);
}

TEST_CASE("consecutive parse failures fire R3 at m") {
    TriggerConfig cfg;
    Trajectory t("g");
    auto obs0 = grid_obs(0);
    t.append(observe_event(obs0));
    t.append(act_error_event(0, ErrorCode::ParseFailure));
    CHECK_FALSE(evaluate(obs0, t, cfg).fired);
    auto obs1 = grid_obs(1);
    t.append(observe_event(obs1));
    t.append(act_error_event(1, ErrorCode::ParseFailure));
    auto v = evaluate(obs1, t, cfg);
    REQUIRE(v.fired);
    CHECK(*v.source == TriggerSource::rule_parse);
    CHECK(v.evidence == std::vector<int>{0, 1});

    Trajectory u("g");
    u.append(observe_event(obs0));
    u.append(act_error_event(0, ErrorCode::ParseFailure));
    u.append(observe_event(obs1));
    u.append(act_error_event(1, ErrorCode::GroundingFailure));
    CHECK_FALSE(evaluate(obs1, u, cfg).fired);
}

TEST_CASE("error markers fire R4") {
    Trajectory t("g");
    auto obs = make_observation(0, "http://mock.local/nope", "RootWebArea '404 Not Found'", {});
    t.append(observe_event(obs));
    auto v = evaluate(obs, t, TriggerConfig{});
    REQUIRE(v.fired);
    CHECK(*v.source == TriggerSource::rule_error_page);
}

TEST_CASE("semantic port: inconsistency fires, outages degrade to rules only") {
    Trajectory t("g");
    auto obs = grid_obs(0);
    t.append(observe_event(obs));
    Goal goal{"g", "Add a new color option brown to the size S of Phoebe Zipper Sweatshirt", std::nullopt, {}};
    TriggerConfig cfg;
    cfg.semantic_enabled = true;

    Inconsistent bad;
    auto v = evaluate(obs, t, cfg, {&goal, nullptr, &bad});
    REQUIRE(v.fired);
    CHECK(*v.source == TriggerSource::semantic);

    Throwing down;
    auto q = evaluate(obs, t, cfg, {&goal, nullptr, &down});
    CHECK_FALSE(q.fired);
    CHECK(q.detail.find("rules only") != std::string::npos);

    AlwaysConsistent fine;
    CHECK_FALSE(evaluate(obs, t, cfg, {&goal, nullptr, &fine}).fired);

    cfg.semantic_enabled = false;
    CHECK_FALSE(evaluate(obs, t, cfg, {&goal, nullptr, &bad}).fired);
}

TEST_CASE("verdict json round-trip") {
    TriggerVerdict v{true, TriggerSource::rule_budget, "reached", {30}};
    json j = v;
    CHECK(j["kind"] == "trigger_verdict");
    TriggerVerdict back = j.get<TriggerVerdict>();
    CHECK(back.fired);
    CHECK(*back.source == TriggerSource::rule_budget);
    CHECK(back.evidence == v.evidence);
    CHECK(json(TriggerVerdict{}).contains("source") == false);
}
