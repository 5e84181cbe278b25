#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tipwise/core/types.hpp"

namespace tipwise {

/// Loop-body phases in the order they occur within one step.
enum class Phase { observe = 0, retrieve, summarize, act, env_step, trigger };

std::string_view to_string(Phase p);
Phase parse_phase(std::string_view s);

/// The `kind` tag a payload must carry for a given phase.
std::string_view payload_kind(Phase p);

enum class RunStatus { running, success, failure, aborted };

std::string_view to_string(RunStatus s);
RunStatus parse_run_status(std::string_view s);

struct TraceEvent {
    int step = 0;
    Phase phase = Phase::observe;
    std::int64_t ts = 0;  // unix millis
    json payload;

    bool operator==(const TraceEvent&) const = default;
};

/// Append-only event log of one session. Events are strictly increasing in
/// (step, phase); once a terminal `act` (stop) is logged no further `act`
/// event is accepted.
class Trajectory {
public:
    Trajectory() = default;
    explicit Trajectory(std::string goal_id) : goal_id_(std::move(goal_id)) {}

    /// Throws Terminal when not running, OrderViolation on a misordered
    /// event or a payload whose kind does not match the phase.
    void append(TraceEvent ev);
    void finish(RunStatus status);

    const std::string& goal_id() const { return goal_id_; }
    RunStatus status() const { return status_; }
    const std::vector<TraceEvent>& events() const { return events_; }
    std::size_t size() const { return events_.size(); }

    /// Events of one phase, in log order.
    std::vector<const TraceEvent*> events_of(Phase p) const;

private:
    std::string goal_id_;
    std::vector<TraceEvent> events_;
    RunStatus status_ = RunStatus::running;
    bool terminal_act_ = false;
};

Trajectory append_event(Trajectory traj, TraceEvent ev);

/// Checks the ordering contract over a recorded event list; on failure
/// `why` names the first offending index.
bool validate_phase_order(std::span<const TraceEvent> events, std::string* why = nullptr);

/// One line of the trajectory file: `{"v":1,"step":..,"phase":..,"ts":..,"payload":{..}}`.
std::string serialize_event(const TraceEvent& ev);
TraceEvent parse_event(std::string_view line);

std::string serialize_events(std::span<const TraceEvent> events);
std::vector<TraceEvent> parse_events(std::string_view text);

/// Line-delimited trajectory file writer; flushes after every event so a
/// crash loses at most the event being written.
class TrajectoryWriter {
public:
    explicit TrajectoryWriter(const std::filesystem::path& path);
    void write(const TraceEvent& ev);
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

/// Replays a trajectory file through `append`, so an invalid log fails to load.
Trajectory load_trajectory(const std::filesystem::path& path, std::string goal_id = {});

}  // namespace tipwise
