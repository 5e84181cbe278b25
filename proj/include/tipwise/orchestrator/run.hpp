#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tipwise/akb/knowledge_base.hpp"
#include "tipwise/core/trajectory.hpp"
#include "tipwise/env/session.hpp"
#include "tipwise/llm/chat.hpp"
#include "tipwise/summarizer/summarizer.hpp"
#include "tipwise/trigger/trigger.hpp"

namespace tipwise {

/// Model backends for one run. A null summary model means the stub.
struct Agent {
    std::shared_ptr<llm::ChatModel> model;
    std::shared_ptr<SummaryModel> summary_model;
    std::shared_ptr<SemanticEvaluator> semantic;  // used only when the trigger config enables it
};

struct RunOptions {
    std::string run_id;                        // generated when empty
    std::filesystem::path record_dir;          // runs root; nothing is persisted when empty
    std::optional<AnswerSpec> site_answer_spec;
    TriggerConfig trigger;                     // max_steps is taken from RunConfig
    json meta = json::object();                // copied into run.json
};

struct TaskRun {
    std::string run_id;
    Goal goal;
    AblationMode mode = AblationMode::full;
    Trajectory trajectory;
    EvalOutcome outcome;
    std::optional<std::string> answer;
    std::optional<TriggerVerdict> verdict;  // set when a trigger fired
    std::optional<json> error;              // `{code, message, detail}` for aborted runs
    int steps = 0;                          // act events
    std::size_t max_belief_chars = 0;
    double mean_belief_chars = 0.0;
    std::int64_t started_ms = 0;
    std::int64_t finished_ms = 0;
    json meta = json::object();
    json final_state;  // env.final_state() when the run ended; null if the session was gone

    RunStatus status() const { return trajectory.status(); }
};

/// `{code, message, detail}`; the error body used in logs and HTTP replies.
json error_body(const Error& e);

/// run.json document for a run.
json run_summary(const TaskRun& run);

/// One fixed-window view of past actions plus the notes ledger; the memory
/// handed to the operator when the summarizer is off.
std::string raw_history_digest(const std::vector<std::string>& history, const std::vector<std::string>& notes,
                               std::size_t window);

/// `<goal>-<utc time>-<random>`, safe as a directory name.
std::string make_run_id(const std::string& goal_id);
bool is_valid_run_id(std::string_view id);

/// Online execution loop. Component errors end the run as aborted; the
/// function itself only throws for an invalid RunConfig.
TaskRun run_task(const Goal& goal, Session& env, const KnowledgeBase* kb, const RunConfig& cfg, const Agent& agent,
                 const RunOptions& opts = {});

/// Layout under a runs root: `<id>/run.json`, `<id>/trajectory.jsonl`,
/// `<id>/screenshots/<sha256>.png`.
class RunRecorder {
public:
    RunRecorder(const std::filesystem::path& root, const std::string& run_id);
    void write_summary(const json& summary);
    void event(const TraceEvent& ev);
    /// Stores PNG bytes once and returns the hash used as screenshot_ref.
    std::string screenshot(const std::string& png);
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
    TrajectoryWriter writer_;
};

/// Read-only access to recorded runs. Safe against concurrent writers: a
/// partially written trailing line is ignored.
class RunStore {
public:
    explicit RunStore(std::filesystem::path root);
    /// Summaries, newest first.
    std::vector<json> list() const;
    /// Throws NotFound.
    json get(const std::string& run_id) const;
    /// Events with index >= from, at most `limit`, plus `next` cursor.
    json events(const std::string& run_id, std::size_t from, std::size_t limit = 500) const;
    /// PNG bytes; throws NotFound.
    std::string screenshot(const std::string& run_id, const std::string& hash) const;
    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path run_dir(const std::string& run_id) const;
    std::filesystem::path root_;
};

}  // namespace tipwise
