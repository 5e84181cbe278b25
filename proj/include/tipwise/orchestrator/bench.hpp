#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tipwise/akb/knowledge_base.hpp"
#include "tipwise/orchestrator/expert_queue.hpp"
#include "tipwise/orchestrator/run.hpp"

namespace tipwise {

struct SuiteTask {
    Goal goal;
    std::filesystem::path site;                   // absolute SiteSpec path
    std::optional<std::filesystem::path> script;  // scripted operator backend
    std::vector<std::string> gated_by;            // components the task needs: "knowledge", "summarizer"
    std::string domain;                           // goal.site_hint, else the site id

    json to_json() const;
    static SuiteTask from_json(const json& j, const std::filesystem::path& base = {});
};

struct Suite {
    std::string name;
    std::filesystem::path dir;
    std::vector<SuiteTask> tasks;
    /// Throws NotFound.
    const SuiteTask& task(const std::string& goal_id) const;
};

/// Reads `<dir>/suite.json`; every site spec is loaded and validated.
Suite load_suite(const std::filesystem::path& dir);

using ModelFactory = std::function<std::shared_ptr<llm::ChatModel>(const SuiteTask&)>;

/// The task's script when it has one, else the HTTP endpoint in `llm`.
ModelFactory default_model_factory(const LlmEndpointConfig& llm);

struct TaskEnvConfig {
    FaultPlan faults;
    WatchdogConfig watchdog;
};

struct SuiteRunConfig {
    RunConfig run;
    ModelFactory model;  // default_model_factory(run.llm) when empty
    std::filesystem::path record_dir;
    TriggerConfig trigger;
    std::function<TaskEnvConfig(const SuiteTask&)> env;  // fault injection hook
};

/// One task against a fresh mock site behind the watchdog.
TaskRun run_suite_task(const SuiteTask& task, const KnowledgeBase* kb, const SuiteRunConfig& cfg,
                       const json& meta = json::object());

struct BenchStats {
    int tasks = 0;
    int successes = 0;
    double rate = 0.0;
    double mean_steps = 0.0;
    double mean_belief_chars = 0.0;
};

struct BenchTaskResult {
    std::string id;
    std::string domain;
    std::string status;
    bool success = false;
    int steps = 0;
    std::optional<std::string> trigger;
    std::string detail;
    double mean_belief_chars = 0.0;
    std::string run_id;
};

struct ModeReport {
    AblationMode mode = AblationMode::full;
    BenchStats overall;
    std::map<std::string, BenchStats> domains;
    std::vector<BenchTaskResult> tasks;
};

struct BenchReport {
    std::string suite;
    bool protocol = false;
    std::vector<ModeReport> modes;
    const ModeReport* find(AblationMode m) const;
};

struct BenchConfig {
    SuiteRunConfig base;
    std::vector<AblationMode> modes = {AblationMode::full};
    bool protocol = false;  // frozen-kb evaluation protocol
    bool parallel = false;  // refused together with protocol
};

BenchStats aggregate(const std::vector<BenchTaskResult>& results);

/// Runs every task in every mode. Under the protocol the kb must be frozen
/// (ProtocolViolation otherwise) and execution is sequential.
BenchReport bench(const Suite& suite, std::shared_ptr<const KnowledgeBase> kb, const BenchConfig& cfg);

/// Versioned machine-readable report; contains no timestamps or run ids,
/// so identical runs give identical documents.
json to_json(const BenchReport& r);
std::string render_table(const BenchReport& r);

struct AdaptationReport {
    int tasks = 0;
    int successes = 0;
    std::vector<std::string> enqueued;  // failure ids created by this pass
    std::vector<std::string> resolved;  // failure ids for these tasks now resolved
    json to_json() const;
};

/// Offline adaptation pass: runs every task against the live store and
/// enqueues each failed run. Throws Frozen when the store is frozen.
AdaptationReport adaptation_loop(const Suite& suite, AkbStore& store, ExpertQueue& queue, const SuiteRunConfig& cfg);

struct Resolution {
    FailureItem failure;
    TaskRun rerun;
};

/// Injects `tip` (InvalidTip, Frozen, DuplicateId propagate and nothing is
/// recorded), re-runs the failed task with the failure's mode and records
/// the attempt.
Resolution resolve_failure(ExpertQueue& queue, AkbStore& store, const std::string& failure_id, KnowledgeTip tip,
                           const SuiteRunConfig& cfg);

}  // namespace tipwise
