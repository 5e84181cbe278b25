#include "tipwise/core/trajectory.hpp"

#include <utility>

#include "tipwise/core/error.hpp"
#include "tipwise/core/fs.hpp"
#include "tipwise/core/text.hpp"

namespace tipwise {

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::observe: return "observe";
        case Phase::retrieve: return "retrieve";
        case Phase::summarize: return "summarize";
        case Phase::act: return "act";
        case Phase::env_step: return "env_step";
        case Phase::trigger: return "trigger";
    }
    return "observe";
}

Phase parse_phase(std::string_view s) {
    for (int i = 0; i <= static_cast<int>(Phase::trigger); ++i) {
        auto p = static_cast<Phase>(i);
        if (to_string(p) == s) return p;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown phase", std::string(s));
}

std::string_view payload_kind(Phase p) {
    switch (p) {
        case Phase::observe: return "observation";
        case Phase::retrieve: return "retrieved_knowledge";
        case Phase::summarize: return "belief_state";
        case Phase::act: return "action_decision";
        case Phase::env_step: return "env_result";
        case Phase::trigger: return "trigger_verdict";
    }
    return "";
}

std::string_view to_string(RunStatus s) {
    switch (s) {
        case RunStatus::running: return "running";
        case RunStatus::success: return "success";
        case RunStatus::failure: return "failure";
        case RunStatus::aborted: return "aborted";
    }
    return "running";
}

RunStatus parse_run_status(std::string_view s) {
    if (s == "running") return RunStatus::running;
    if (s == "success") return RunStatus::success;
    if (s == "failure") return RunStatus::failure;
    if (s == "aborted") return RunStatus::aborted;
    throw Error(ErrorCode::InvalidArgument, "unknown run status", std::string(s));
}

namespace {

std::pair<int, int> order_key(const TraceEvent& ev) {
    return {ev.step, static_cast<int>(ev.phase)};
}

std::string describe(const TraceEvent& ev) {
    return std::string(to_string(ev.phase)) + "@" + std::to_string(ev.step);
}

bool is_terminal_act(const TraceEvent& ev) {
    return ev.phase == Phase::act && ev.payload.is_object() && ev.payload.value("terminal", false);
}

}  // namespace

void Trajectory::append(TraceEvent ev) {
    if (status_ != RunStatus::running) {
        throw Error(ErrorCode::Terminal, "trajectory is not running", std::string(to_string(status_)));
    }
    if (ev.step < 0) {
        throw Error(ErrorCode::OrderViolation, "negative step", describe(ev));
    }
    if (!ev.payload.is_object() || ev.payload.value("kind", "") != payload_kind(ev.phase)) {
        throw Error(ErrorCode::OrderViolation, "payload kind does not match phase", describe(ev));
    }
    if (!events_.empty() && !(order_key(events_.back()) < order_key(ev))) {
        throw Error(ErrorCode::OrderViolation,
                    describe(ev) + " cannot follow " + describe(events_.back()), describe(ev));
    }
    if (ev.phase == Phase::act && terminal_act_) {
        throw Error(ErrorCode::OrderViolation, "act after terminal stop", describe(ev));
    }
    if (is_terminal_act(ev)) terminal_act_ = true;
    events_.push_back(std::move(ev));
}

void Trajectory::finish(RunStatus status) {
    if (status_ != RunStatus::running) {
        throw Error(ErrorCode::Terminal, "trajectory already finished");
    }
    status_ = status;
}

std::vector<const TraceEvent*> Trajectory::events_of(Phase p) const {
    std::vector<const TraceEvent*> out;
    for (const auto& ev : events_) {
        if (ev.phase == p) out.push_back(&ev);
    }
    return out;
}

Trajectory append_event(Trajectory traj, TraceEvent ev) {
    traj.append(std::move(ev));
    return traj;
}

bool validate_phase_order(std::span<const TraceEvent> events, std::string* why) {
    Trajectory probe;
    for (std::size_t i = 0; i < events.size(); ++i) {
        try {
            probe.append(events[i]);
        } catch (const Error& e) {
            if (why) *why = "event " + std::to_string(i) + ": " + e.what();
            return false;
        }
    }
    return true;
}

std::string serialize_event(const TraceEvent& ev) {
    json j{{"v", 1},
           {"step", ev.step},
           {"phase", to_string(ev.phase)},
           {"ts", ev.ts},
           {"payload", ev.payload}};
    return j.dump();
}

TraceEvent parse_event(std::string_view line) {
    json j = json::parse(line);
    if (j.value("v", 0) != 1) {
        throw Error(ErrorCode::InvalidArgument, "unsupported trajectory record version");
    }
    TraceEvent ev;
    ev.step = j.at("step").get<int>();
    ev.phase = parse_phase(j.at("phase").get<std::string>());
    ev.ts = j.at("ts").get<std::int64_t>();
    ev.payload = j.at("payload");
    return ev;
}

std::string serialize_events(std::span<const TraceEvent> events) {
    std::string out;
    for (const auto& ev : events) {
        out += serialize_event(ev);
        out += '\n';
    }
    return out;
}

std::vector<TraceEvent> parse_events(std::string_view content) {
    std::vector<TraceEvent> out;
    for (const auto& line : text::split_lines(content)) {
        if (text::trim(line).empty()) continue;
        out.push_back(parse_event(line));
    }
    return out;
}

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& path) : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) {
        throw Error(ErrorCode::Io, "cannot open trajectory file", path.string());
    }
}

void TrajectoryWriter::write(const TraceEvent& ev) {
    out_ << serialize_event(ev) << '\n';
    out_.flush();
}

Trajectory load_trajectory(const std::filesystem::path& path, std::string goal_id) {
    Trajectory traj(std::move(goal_id));
    for (auto& ev : parse_events(fs::read_file(path))) {
        traj.append(std::move(ev));
    }
    return traj;
}

}  // namespace tipwise
