#include "tipwise/orchestrator/expert_queue.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>

#include "tipwise/core/error.hpp"
#include "tipwise/core/fs.hpp"

namespace tipwise {

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

class FileLock {
public:
    explicit FileLock(const std::filesystem::path& path) {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) throw Error(ErrorCode::QueueUnavailable, "cannot open queue lock", path.string());
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            throw Error(ErrorCode::QueueUnavailable, "cannot lock queue", path.string());
        }
    }
    ~FileLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

}  // namespace

std::string_view to_string(FailureStatus s) { return s == FailureStatus::open ? "open" : "resolved"; }

void to_json(json& j, const FailureItem& f) {
    json attempts = json::array();
    for (const auto& a : f.attempts) {
        attempts.push_back({{"tip_id", a.tip_id}, {"run_id", a.run_id}, {"status", a.status}, {"ts", a.ts}});
    }
    j = json{{"id", f.id},           {"run_id", f.run_id}, {"mode", f.mode},
             {"task", f.task},       {"verdict", f.verdict}, {"status", to_string(f.status)},
             {"created_ms", f.created_ms}, {"attempts", attempts}};
}

void from_json(const json& j, FailureItem& f) {
    f.id = j.at("id").get<std::string>();
    f.run_id = j.value("run_id", "");
    f.mode = j.value("mode", "full");
    f.task = j.value("task", json::object());
    f.verdict = j.value("verdict", json(nullptr));
    f.status = j.value("status", "open") == "resolved" ? FailureStatus::resolved : FailureStatus::open;
    f.created_ms = j.value("created_ms", std::int64_t{0});
    f.attempts.clear();
    for (const auto& a : j.value("attempts", json::array())) {
        f.attempts.push_back({a.value("tip_id", ""), a.value("run_id", ""), a.value("status", ""),
                              a.value("ts", std::int64_t{0})});
    }
}

ExpertQueue::ExpertQueue(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.empty()) throw Error(ErrorCode::QueueUnavailable, "queue path is empty");
    std::error_code ec;
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path(), ec);
    locked([](json&) { return false; });
}

json ExpertQueue::locked(const std::function<bool(json&)>& fn) const {
    std::lock_guard guard(mu_);
    FileLock lock(path_.string() + ".lock");
    json doc{{"v", 1}, {"next", 1}, {"items", json::array()}};
    if (std::filesystem::exists(path_)) {
        try {
            doc = json::parse(fs::read_file(path_));
        } catch (const std::exception& e) {
            throw Error(ErrorCode::QueueUnavailable, "queue file is unreadable", e.what());
        }
        if (doc.value("v", 0) != 1 || !doc.contains("items")) {
            throw Error(ErrorCode::QueueUnavailable, "unsupported queue document", path_.string());
        }
    }
    if (fn(doc)) {
        try {
            fs::write_file_atomic(path_, doc.dump(2));
        } catch (const Error& e) {
            throw Error(ErrorCode::QueueUnavailable, "cannot write queue", e.what());
        }
    }
    return doc;
}

std::string ExpertQueue::enqueue(FailureItem item) {
    std::string id;
    locked([&](json& doc) {
        int n = doc.value("next", 1);
        char buf[16];
        std::snprintf(buf, sizeof buf, "f-%04d", n);
        id = buf;
        item.id = id;
        if (item.created_ms == 0) item.created_ms = now_ms();
        doc["next"] = n + 1;
        doc["items"].push_back(json(item));
        return true;
    });
    return id;
}

std::vector<FailureItem> ExpertQueue::list(std::optional<FailureStatus> status) const {
    auto doc = locked([](json&) { return false; });
    std::vector<FailureItem> out;
    for (const auto& j : doc["items"]) {
        auto item = j.get<FailureItem>();
        if (!status || item.status == *status) out.push_back(std::move(item));
    }
    return out;
}

FailureItem ExpertQueue::get(const std::string& id) const {
    for (auto& item : list()) {
        if (item.id == id) return item;
    }
    throw Error(ErrorCode::NotFound, "no such failure", id);
}

FailureItem ExpertQueue::record_attempt(const std::string& id, ResolutionAttempt attempt) {
    std::optional<FailureItem> out;
    if (attempt.ts == 0) attempt.ts = now_ms();
    locked([&](json& doc) {
        for (auto& j : doc["items"]) {
            if (j.value("id", "") != id) continue;
            auto item = j.get<FailureItem>();
            item.attempts.push_back(attempt);
            if (attempt.status == "success") item.status = FailureStatus::resolved;
            j = json(item);
            out = item;
            return true;
        }
        return false;
    });
    if (!out) throw Error(ErrorCode::NotFound, "no such failure", id);
    return *out;
}

}  // namespace tipwise
