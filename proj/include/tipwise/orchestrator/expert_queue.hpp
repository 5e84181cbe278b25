#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tipwise/core/types.hpp"

namespace tipwise {

enum class FailureStatus { open, resolved };
std::string_view to_string(FailureStatus s);

/// One attempt to fix a failure with a tip.
struct ResolutionAttempt {
    std::string tip_id;
    std::string run_id;
    std::string status;  // RunStatus of the re-run
    std::int64_t ts = 0;
};

/// A failed run awaiting expert review. `task` holds what a re-run needs
/// (goal, site and script paths).
struct FailureItem {
    std::string id;
    std::string run_id;
    std::string mode;
    json task = json::object();
    json verdict;  // trigger verdict, or an evaluation note when no trigger fired
    FailureStatus status = FailureStatus::open;
    std::int64_t created_ms = 0;
    std::vector<ResolutionAttempt> attempts;
};

void to_json(json& j, const FailureItem& f);
void from_json(const json& j, FailureItem& f);

/// Persistent failure queue: one JSON document guarded by an flock'd
/// sibling lock file, so a runner process and a service process can share
/// it. Every operation is a locked read-modify-write. Errors map to
/// QueueUnavailable.
class ExpertQueue {
public:
    explicit ExpertQueue(std::filesystem::path path);

    /// Assigns the id (`f-0001`, ...) and returns it.
    std::string enqueue(FailureItem item);
    std::vector<FailureItem> list(std::optional<FailureStatus> status = std::nullopt) const;
    /// Throws NotFound.
    FailureItem get(const std::string& id) const;
    /// Appends an attempt; a successful re-run marks the item resolved.
    FailureItem record_attempt(const std::string& id, ResolutionAttempt attempt);

    const std::filesystem::path& path() const { return path_; }

private:
    json locked(const std::function<bool(json&)>& fn) const;

    std::filesystem::path path_;
    mutable std::mutex mu_;
};

}  // namespace tipwise
