#include "tipwise/orchestrator/bench.hpp"

#include <cstdio>
#include <future>
#include <set>
#include <sstream>

#include "tipwise/core/fs.hpp"

namespace tipwise {

json SuiteTask::to_json() const {
    json j{{"goal", goal}, {"site", site.string()}, {"domain", domain}};
    j["script"] = script ? json(script->string()) : json(nullptr);
    j["gated_by"] = gated_by;
    return j;
}

SuiteTask SuiteTask::from_json(const json& j, const std::filesystem::path& base) {
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() || base.empty() ? path : base / path;
    };
    SuiteTask t;
    t.goal = j.at("goal").get<Goal>();
    t.site = resolve(j.at("site").get<std::string>());
    if (j.contains("script") && j["script"].is_string()) t.script = resolve(j["script"].get<std::string>());
    if (j.contains("gated_by") && j["gated_by"].is_array()) t.gated_by = j["gated_by"].get<std::vector<std::string>>();
    t.domain = j.value("domain", t.goal.site_hint.value_or(""));
    return t;
}

const SuiteTask& Suite::task(const std::string& goal_id) const {
    for (const auto& t : tasks) {
        if (t.goal.id == goal_id) return t;
    }
    throw Error(ErrorCode::NotFound, "no such task in suite", goal_id);
}

Suite load_suite(const std::filesystem::path& dir) {
    auto path = dir / "suite.json";
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::NotFound, "suite.json not found", dir.string());
    json doc;
    try {
        doc = json::parse(fs::read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, "suite.json is not valid JSON", e.what());
    }
    if (doc.value("v", 0) != 1) throw Error(ErrorCode::InvalidArgument, "unsupported suite version", path.string());
    Suite s;
    s.name = doc.value("name", dir.filename().string());
    s.dir = std::filesystem::absolute(dir);
    std::set<std::string> ids;
    for (const auto& j : doc.at("tasks")) {
        auto t = SuiteTask::from_json(j, s.dir);
        if (!ids.insert(t.goal.id).second) throw Error(ErrorCode::InvalidArgument, "duplicate task id", t.goal.id);
        auto spec = load_site_spec(t.site);
        if (t.domain.empty()) t.domain = spec.site_id;
        if (t.script && !std::filesystem::exists(*t.script)) {
            throw Error(ErrorCode::NotFound, "script not found", t.script->string());
        }
        s.tasks.push_back(std::move(t));
    }
    return s;
}

ModelFactory default_model_factory(const LlmEndpointConfig& llm) {
    return [llm](const SuiteTask& task) -> std::shared_ptr<llm::ChatModel> {
        if (task.script) return llm::ScriptedChatModel::from_file(*task.script);
        if (llm.url.empty()) {
            throw Error(ErrorCode::ModelUnavailable, "task has no script and no model endpoint is configured",
                        task.goal.id);
        }
        return std::make_shared<llm::HttpChatModel>(llm);
    };
}

TaskRun run_suite_task(const SuiteTask& task, const KnowledgeBase* kb, const SuiteRunConfig& cfg, const json& meta) {
    auto spec = load_site_spec(task.site);
    TaskEnvConfig env_cfg = cfg.env ? cfg.env(task) : TaskEnvConfig{};
    auto answer_spec = spec.answer_spec;
    auto site = std::make_shared<MockSite>(std::move(spec), env_cfg.faults);
    WatchdogSession env([site] { return std::make_unique<MockSession>(site); }, env_cfg.watchdog);

    Agent agent;
    RunOptions opts;
    opts.record_dir = cfg.record_dir;
    opts.site_answer_spec = answer_spec;
    opts.trigger = cfg.trigger;
    opts.meta = meta;
    opts.meta["task"] = task.to_json();
    try {
        agent.model = cfg.model ? cfg.model(task) : default_model_factory(cfg.run.llm)(task);
    } catch (const Error&) {
        // run_task records the missing backend as an aborted run
    }
    return run_task(task.goal, env, kb, cfg.run, agent, opts);
}

BenchStats aggregate(const std::vector<BenchTaskResult>& results) {
    BenchStats s;
    double steps = 0;
    double belief = 0;
    for (const auto& r : results) {
        ++s.tasks;
        if (r.success) ++s.successes;
        steps += r.steps;
        belief += r.mean_belief_chars;
    }
    if (s.tasks > 0) {
        s.rate = static_cast<double>(s.successes) / s.tasks;
        s.mean_steps = steps / s.tasks;
        s.mean_belief_chars = belief / s.tasks;
    }
    return s;
}

const ModeReport* BenchReport::find(AblationMode m) const {
    for (const auto& r : modes) {
        if (r.mode == m) return &r;
    }
    return nullptr;
}

namespace {

BenchTaskResult summarize_run(const SuiteTask& task, const TaskRun& run) {
    BenchTaskResult r;
    r.id = task.goal.id;
    r.domain = task.domain;
    r.status = std::string(to_string(run.status()));
    r.success = run.status() == RunStatus::success;
    r.steps = run.steps;
    if (run.verdict && run.verdict->source) r.trigger = std::string(to_string(*run.verdict->source));
    r.detail = run.outcome.detail;
    r.mean_belief_chars = run.mean_belief_chars;
    r.run_id = run.run_id;
    return r;
}

json stats_json(const BenchStats& s) {
    return json{{"tasks", s.tasks},
                {"successes", s.successes},
                {"rate", s.rate},
                {"mean_steps", s.mean_steps},
                {"mean_belief_chars", s.mean_belief_chars}};
}

}  // namespace

BenchReport bench(const Suite& suite, std::shared_ptr<const KnowledgeBase> kb, const BenchConfig& cfg) {
    if (cfg.protocol) {
        if (!kb || !kb->frozen()) {
            throw Error(ErrorCode::ProtocolViolation, "evaluation protocol requires a frozen knowledge base");
        }
        if (cfg.parallel) throw Error(ErrorCode::ProtocolViolation, "evaluation protocol runs tasks sequentially");
    }
    BenchReport report;
    report.suite = suite.name;
    report.protocol = cfg.protocol;
    for (auto mode : cfg.modes) {
        SuiteRunConfig rc = cfg.base;
        rc.run.ablation_mode = mode;
        ModeReport mr;
        mr.mode = mode;
        auto run_one = [&](const SuiteTask& t) {
            return summarize_run(t, run_suite_task(t, kb.get(), rc, json{{"bench", suite.name}}));
        };
        if (cfg.parallel) {
            std::vector<std::future<BenchTaskResult>> futures;
            for (const auto& t : suite.tasks) futures.push_back(std::async(std::launch::async, run_one, std::cref(t)));
            for (auto& f : futures) mr.tasks.push_back(f.get());
        } else {
            for (const auto& t : suite.tasks) mr.tasks.push_back(run_one(t));
        }
        mr.overall = aggregate(mr.tasks);
        std::map<std::string, std::vector<BenchTaskResult>> by_domain;
        for (const auto& r : mr.tasks) by_domain[r.domain].push_back(r);
        for (const auto& [d, rs] : by_domain) mr.domains[d] = aggregate(rs);
        report.modes.push_back(std::move(mr));
    }
    return report;
}

json to_json(const BenchReport& r) {
    json modes = json::array();
    for (const auto& m : r.modes) {
        json domains = json::object();
        for (const auto& [d, s] : m.domains) domains[d] = stats_json(s);
        json tasks = json::array();
        for (const auto& t : m.tasks) {
            tasks.push_back({{"id", t.id},
                             {"domain", t.domain},
                             {"status", t.status},
                             {"success", t.success},
                             {"steps", t.steps},
                             {"trigger", t.trigger ? json(*t.trigger) : json(nullptr)},
                             {"detail", t.detail},
                             {"mean_belief_chars", t.mean_belief_chars}});
        }
        modes.push_back({{"mode", to_string(m.mode)}, {"overall", stats_json(m.overall)}, {"domains", domains},
                         {"tasks", tasks}});
    }
    return json{{"v", 1}, {"kind", "bench_report"}, {"suite", r.suite}, {"protocol", r.protocol}, {"modes", modes}};
}

std::string render_table(const BenchReport& r) {
    std::ostringstream out;
    char line[256];
    out << "suite " << r.suite << (r.protocol ? " (frozen protocol)" : "") << "\n\n";
    std::snprintf(line, sizeof line, "%-14s %-16s %6s %6s %7s %10s %12s\n", "mode", "domain", "tasks", "ok", "rate",
                  "mean_steps", "mean_belief");
    out << line;
    for (const auto& m : r.modes) {
        auto row = [&](const std::string& domain, const BenchStats& s) {
            std::snprintf(line, sizeof line, "%-14s %-16s %6d %6d %6.1f%% %10.2f %12.1f\n",
                          std::string(to_string(m.mode)).c_str(), domain.c_str(), s.tasks, s.successes, 100.0 * s.rate,
                          s.mean_steps, s.mean_belief_chars);
            out << line;
        };
        for (const auto& [d, s] : m.domains) row(d, s);
        row("overall", m.overall);
    }
    out << "\n";
    for (const auto& m : r.modes) {
        out << to_string(m.mode) << ":";
        for (const auto& t : m.tasks) {
            out << " " << t.id << "=" << (t.success ? "ok" : t.trigger ? *t.trigger : t.status);
        }
        out << "\n";
    }
    return out.str();
}

json AdaptationReport::to_json() const {
    return json{{"v", 1},
                {"kind", "adaptation_report"},
                {"tasks", tasks},
                {"successes", successes},
                {"enqueued", enqueued},
                {"resolved", resolved}};
}

AdaptationReport adaptation_loop(const Suite& suite, AkbStore& store, ExpertQueue& queue, const SuiteRunConfig& cfg) {
    if (store.snapshot()->frozen()) throw Error(ErrorCode::Frozen, "adaptation needs a mutable knowledge base");
    AdaptationReport report;
    for (const auto& task : suite.tasks) {
        auto kb = store.snapshot();
        auto run = run_suite_task(task, kb.get(), cfg, json{{"adaptation", suite.name}});
        ++report.tasks;
        if (run.status() == RunStatus::success) {
            ++report.successes;
            continue;
        }
        FailureItem item;
        item.run_id = run.run_id;
        item.mode = std::string(to_string(cfg.run.ablation_mode));
        item.task = task.to_json();
        item.verdict = run.verdict ? json(*run.verdict)
                                   : json{{"kind", "trigger_verdict"}, {"fired", false}, {"detail", run.outcome.detail},
                                          {"evidence", json::array()}};
        report.enqueued.push_back(queue.enqueue(std::move(item)));
    }
    std::set<std::string> ids;
    for (const auto& t : suite.tasks) ids.insert(t.goal.id);
    for (const auto& f : queue.list(FailureStatus::resolved)) {
        auto goal_id = f.task.value("goal", json::object()).value("id", "");
        if (ids.count(goal_id)) report.resolved.push_back(f.id);
    }
    return report;
}

Resolution resolve_failure(ExpertQueue& queue, AkbStore& store, const std::string& failure_id, KnowledgeTip tip,
                           const SuiteRunConfig& cfg) {
    auto failure = queue.get(failure_id);
    auto tip_id = tip.id;
    store.add_tip(std::move(tip));
    auto task = SuiteTask::from_json(failure.task);
    SuiteRunConfig rc = cfg;
    rc.run.ablation_mode = parse_ablation_mode(failure.mode);
    auto kb = store.snapshot();
    auto rerun = run_suite_task(task, kb.get(), rc, json{{"resolution_of", failure_id}, {"tip_id", tip_id}});
    auto updated = queue.record_attempt(failure_id, ResolutionAttempt{tip_id, rerun.run_id,
                                                                      std::string(to_string(rerun.status())), 0});
    return Resolution{std::move(updated), std::move(rerun)};
}

}  // namespace tipwise
