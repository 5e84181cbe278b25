#include "tipwise/orchestrator/run.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <random>

#include "tipwise/core/digest.hpp"
#include "tipwise/core/fs.hpp"
#include "tipwise/operator/operator.hpp"

namespace tipwise {

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

bool recoverable_step_error(ErrorCode c) {
    return c == ErrorCode::InvalidBid || c == ErrorCode::NavigationError;
}

std::filesystem::path prepare_run_dir(const std::filesystem::path& root, const std::string& run_id) {
    if (!is_valid_run_id(run_id)) throw Error(ErrorCode::InvalidArgument, "invalid run id", run_id);
    std::filesystem::create_directories(root / run_id);
    return root / run_id;
}

}  // namespace

json error_body(const Error& e) {
    return json{{"code", to_string(e.code())}, {"message", e.what()}, {"detail", e.detail()}};
}

json run_summary(const TaskRun& run) {
    json j{{"v", 1},
           {"id", run.run_id},
           {"goal", run.goal},
           {"mode", to_string(run.mode)},
           {"status", to_string(run.status())},
           {"outcome", run.outcome},
           {"answer", run.answer ? json(*run.answer) : json(nullptr)},
           {"steps", run.steps},
           {"verdict", run.verdict ? json(*run.verdict) : json(nullptr)},
           {"error", run.error ? *run.error : json(nullptr)},
           {"max_belief_chars", run.max_belief_chars},
           {"mean_belief_chars", run.mean_belief_chars},
           {"started_ms", run.started_ms},
           {"finished_ms", run.finished_ms},
           {"meta", run.meta},
           {"final_state", run.final_state}};
    return j;
}

std::string raw_history_digest(const std::vector<std::string>& history, const std::vector<std::string>& notes,
                               std::size_t window) {
    std::string out;
    if (!history.empty()) {
        std::size_t first = history.size() > window ? history.size() - window : 0;
        out += "Recent actions:\n";
        for (std::size_t i = first; i < history.size(); ++i) out += "- " + history[i] + "\n";
    }
    if (!notes.empty()) {
        if (!out.empty()) out += "\n";
        out += "Notes:\n";
        for (const auto& n : notes) out += "- " + n + "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

std::string make_run_id(const std::string& goal_id) {
    static std::mutex mu;
    static std::mt19937_64 rng{std::random_device{}()};
    std::uint64_t r;
    {
        std::lock_guard lock(mu);
        r = rng();
    }
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%S", &tm);
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "%06llx", static_cast<unsigned long long>(r & 0xffffff));
    std::string g;
    for (char c : goal_id) g += (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-') ? c : '_';
    if (g.empty()) g = "run";
    return g + "-" + stamp + "-" + suffix;
}

bool is_valid_run_id(std::string_view id) {
    if (id.empty() || id.size() > 200 || id.front() == '.') return false;
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

TaskRun run_task(const Goal& goal, Session& env, const KnowledgeBase* kb, const RunConfig& cfg, const Agent& agent,
                 const RunOptions& opts) {
    cfg.validate();
    TaskRun run;
    run.run_id = opts.run_id.empty() ? make_run_id(goal.id) : opts.run_id;
    run.goal = goal;
    run.mode = cfg.ablation_mode;
    run.trajectory = Trajectory(goal.id);
    run.meta = opts.meta;
    run.started_ms = now_ms();

    std::unique_ptr<RunRecorder> rec;
    if (!opts.record_dir.empty()) {
        rec = std::make_unique<RunRecorder>(opts.record_dir, run.run_id);
        rec->write_summary(run_summary(run));
    }
    auto log = [&](int step, Phase phase, json payload) {
        TraceEvent ev{step, phase, now_ms(), std::move(payload)};
        run.trajectory.append(ev);
        if (rec) rec->event(ev);
    };

    const bool use_kb = uses_knowledge(cfg.ablation_mode) && kb != nullptr;
    const bool use_summary = uses_summarizer(cfg.ablation_mode);
    TriggerConfig tcfg = opts.trigger;
    tcfg.max_steps = cfg.max_steps;
    TriggerContext tctx{&goal, nullptr, agent.semantic.get()};

    BeliefState belief;
    std::optional<Action> last_action;
    std::optional<json> last_result;
    std::vector<std::string> history;
    std::size_t belief_total = 0;
    std::size_t belief_events = 0;
    bool stopped = false;

    try {
        if (!agent.model) throw Error(ErrorCode::ModelUnavailable, "no operator model configured");
        Operator op(agent.model, OperatorConfig{cfg.parse_retries, env.url_templates(), cfg.llm.model_id});
        Summarizer summarizer(agent.summary_model ? agent.summary_model : std::make_shared<StubSummaryModel>(),
                              SummarizerConfig{cfg.belief_budget_chars});

        for (int t = 0;; ++t) {
            auto obs = env.observe(t, cfg.ax_tree_max_chars);
            if (rec) {
                if (auto png = env.screenshot()) obs.screenshot_ref = rec->screenshot(*png);
            }
            log(t, Phase::observe, json(obs));
            if (t >= cfg.max_steps) {
                auto v = evaluate(obs, run.trajectory, tcfg, tctx);
                if (v.fired) {
                    log(t, Phase::trigger, json(v));
                    run.verdict = v;
                }
                break;
            }

            RetrievedKnowledge knowledge;
            if (use_kb) {
                RetrieveOptions ro;
                ro.limit = cfg.retrieve_limit;
                knowledge = kb->retrieve(obs, goal, ro);
            } else {
                knowledge.query.url = obs.url;
            }
            log(t, Phase::retrieve, json(knowledge));

            if (use_summary) {
                belief = summarizer.summarize(belief, obs, knowledge, last_action, goal, last_result);
                log(t, Phase::summarize, json(belief));
                belief_total += belief.char_len;
                ++belief_events;
                run.max_belief_chars = std::max(run.max_belief_chars, belief.char_len);
                tctx.belief = &belief;
            }

            std::optional<ActionDecision> decision;
            try {
                decision = use_summary
                               ? op.decide(obs, belief, knowledge, goal)
                               : op.decide(obs, raw_history_digest(history, env.notes(), cfg.history_window),
                                           knowledge, goal);
                log(t, Phase::act, json(*decision));
                ++run.steps;
            } catch (const DecisionError& e) {
                json payload{{"kind", "action_decision"},
                             {"terminal", false},
                             {"raw", e.raw()},
                             {"retry_count", e.retry_count()},
                             {"error", error_body(e)}};
                log(t, Phase::act, std::move(payload));
                ++run.steps;
            }

            if (decision) {
                const Action& a = decision->action;
                EnvResult r;
                try {
                    r = env.step(a);
                } catch (const Error& e) {
                    if (!recoverable_step_error(e.code())) throw;
                    r.ok = false;
                    r.note = std::string(to_string(e.code())) + ": " + e.what();
                    if (!e.detail().empty()) r.note += " (" + e.detail() + ")";
                    r.url = env.current_url();
                }
                last_action = a;
                last_result = json(r);
                history.push_back(describe_action(t, a, last_result));
                log(t, Phase::env_step, *last_result);
                if (is_stop(a)) {
                    stopped = true;
                    run.answer = primary_argument(a);
                    break;
                }
            }

            auto v = evaluate(obs, run.trajectory, tcfg, tctx);
            if (v.fired) {
                log(t, Phase::trigger, json(v));
                run.verdict = v;
                break;
            }
        }

        if (stopped) {
            run.outcome = evaluate_success(goal, run.answer, env.final_state(), opts.site_answer_spec);
        } else {
            auto spec = goal.reference_answer ? goal.reference_answer : opts.site_answer_spec;
            run.outcome.success = false;
            run.outcome.mode = spec && spec->kind == AnswerSpec::Kind::programmatic ? EvalMode::programmatic
                                                                                    : EvalMode::answer_based;
            run.outcome.detail = run.verdict && run.verdict->source
                                     ? "ended by trigger " + std::string(to_string(*run.verdict->source))
                                     : "no stop action";
        }
        run.trajectory.finish(run.outcome.success ? RunStatus::success : RunStatus::failure);
    } catch (const Error& e) {
        run.error = error_body(e);
        run.outcome.success = false;
        run.outcome.detail = "aborted: " + std::string(to_string(e.code()));
        run.trajectory.finish(RunStatus::aborted);
    } catch (const std::exception& e) {
        run.error = json{{"code", "Unrecoverable"}, {"message", e.what()}, {"detail", ""}};
        run.outcome.success = false;
        run.outcome.detail = "aborted";
        run.trajectory.finish(RunStatus::aborted);
    }

    try {
        run.final_state = env.final_state();
    } catch (const std::exception&) {
        run.final_state = nullptr;
    }
    run.mean_belief_chars = belief_events ? static_cast<double>(belief_total) / static_cast<double>(belief_events) : 0.0;
    run.finished_ms = now_ms();
    if (rec) rec->write_summary(run_summary(run));
    return run;
}

RunRecorder::RunRecorder(const std::filesystem::path& root, const std::string& run_id)
    : dir_(prepare_run_dir(root, run_id)), writer_(dir_ / "trajectory.jsonl") {}

void RunRecorder::write_summary(const json& summary) { fs::write_file_atomic(dir_ / "run.json", summary.dump(2)); }

void RunRecorder::event(const TraceEvent& ev) { writer_.write(ev); }

std::string RunRecorder::screenshot(const std::string& png) {
    auto hash = sha256_hex(png);
    auto path = dir_ / "screenshots" / (hash + ".png");
    if (!std::filesystem::exists(path)) {
        std::filesystem::create_directories(path.parent_path());
        fs::write_file_atomic(path, png);
    }
    return hash;
}

RunStore::RunStore(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path RunStore::run_dir(const std::string& run_id) const {
    if (!is_valid_run_id(run_id)) throw Error(ErrorCode::NotFound, "no such run", run_id);
    auto dir = root_ / run_id;
    if (!std::filesystem::exists(dir / "run.json")) throw Error(ErrorCode::NotFound, "no such run", run_id);
    return dir;
}

std::vector<json> RunStore::list() const {
    std::vector<json> out;
    std::error_code ec;
    if (!std::filesystem::is_directory(root_, ec)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(root_, ec)) {
        auto path = entry.path() / "run.json";
        if (!std::filesystem::exists(path)) continue;
        try {
            out.push_back(json::parse(fs::read_file(path)));
        } catch (const std::exception&) {
            continue;
        }
    }
    std::sort(out.begin(), out.end(), [](const json& a, const json& b) {
        auto ta = a.value("started_ms", std::int64_t{0});
        auto tb = b.value("started_ms", std::int64_t{0});
        if (ta != tb) return ta > tb;
        return a.value("id", "") < b.value("id", "");
    });
    return out;
}

json RunStore::get(const std::string& run_id) const { return json::parse(fs::read_file(run_dir(run_id) / "run.json")); }

json RunStore::events(const std::string& run_id, std::size_t from, std::size_t limit) const {
    auto dir = run_dir(run_id);
    std::ifstream in(dir / "trajectory.jsonl");
    json events = json::array();
    std::string line;
    std::size_t index = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (in.eof()) {
            // no trailing newline yet: the writer is mid-line
            try {
                (void)json::parse(line);
            } catch (const std::exception&) {
                break;
            }
        }
        if (index >= from && events.size() < limit) events.push_back(json::parse(line));
        ++index;
    }
    std::size_t next = std::min(index, from + events.size());
    if (from > index) next = index;
    return json{{"v", 1}, {"run_id", run_id}, {"from", from}, {"next", next}, {"total", index}, {"events", events}};
}

std::string RunStore::screenshot(const std::string& run_id, const std::string& hash) const {
    auto dir = run_dir(run_id);
    bool hex = hash.size() == 64 && std::all_of(hash.begin(), hash.end(), [](char c) {
                   return std::isdigit(static_cast<unsigned char>(c)) || (c >= 'a' && c <= 'f');
               });
    auto path = dir / "screenshots" / (hash + ".png");
    if (!hex || !std::filesystem::exists(path)) throw Error(ErrorCode::NotFound, "no such screenshot", hash);
    return fs::read_file(path);
}

}  // namespace tipwise
