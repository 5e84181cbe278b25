#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "tipwise/akb/knowledge_base.hpp"
#include "tipwise/orchestrator/bench.hpp"
#include "tipwise/orchestrator/expert_queue.hpp"

namespace tipwise {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8700;                  // 0 picks a free port
    std::string token;                // required in X-Auth-Token when non-empty; /health is open
    std::filesystem::path runs_dir;   // RunStore root, also where launched runs record
    std::filesystem::path queue_path;
    std::filesystem::path audit_log;  // JSON lines; no audit file when empty
    std::shared_ptr<AkbStore> store;
    std::optional<Suite> suite;       // tasks launchable via POST /runs
    SuiteRunConfig run;               // base config for launches and re-runs
};

/// HTTP status for an error code.
int http_status(ErrorCode code);

/// The workbench API. All state lives in the akb store, the expert queue
/// and the run directory; the service itself keeps none beyond in-flight
/// launches.
class Service {
public:
    /// Throws StoreUnavailable when a store path is unusable.
    explicit Service(ServiceConfig cfg);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    /// Throws BindFailure.
    int start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();
    /// Blocks until every launched run has finished.
    void wait_for_launches();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace tipwise
