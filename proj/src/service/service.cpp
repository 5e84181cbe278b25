#include "tipwise/service/service.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <ctime>
#include <fstream>
#include <mutex>
#include <thread>

#include "tipwise/core/fs.hpp"

namespace tipwise {

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotFound: return 404;
        case ErrorCode::Frozen:
        case ErrorCode::DuplicateId:
        case ErrorCode::ProtocolViolation: return 409;
        case ErrorCode::InvalidArgument:
        case ErrorCode::InvalidTip:
        case ErrorCode::BadPattern:
        case ErrorCode::ParseError:
        case ErrorCode::UnknownActionName:
        case ErrorCode::MalformedArguments: return 400;
        case ErrorCode::QueueUnavailable:
        case ErrorCode::StoreUnavailable:
        case ErrorCode::ModelUnavailable: return 503;
        default: return 500;
    }
}

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string iso_now() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                 const std::string& detail = {}) {
    reply(res, status, json{{"v", 1}, {"code", code}, {"message", message}, {"detail", detail}});
}

json parse_body(const httplib::Request& req) {
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
        if (j.contains("v") && j["v"] != 1) throw Error(ErrorCode::InvalidArgument, "unsupported document version");
        return j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, "request body is not valid JSON", e.what());
    }
}

KnowledgeTip tip_from_body(const json& body) {
    const json& t = body.contains("tip") ? body["tip"] : body;
    try {
        return t.get<KnowledgeTip>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidTip, "tip document is malformed", e.what());
    }
}

std::size_t query_size(const httplib::Request& req, const char* name, std::size_t fallback) {
    if (!req.has_param(name)) return fallback;
    const auto& s = req.get_param_value(name);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos || s.size() > 9) {
        throw Error(ErrorCode::InvalidArgument, std::string("query parameter must be a non-negative integer"), name);
    }
    return static_cast<std::size_t>(std::stoul(s));
}

}  // namespace

struct Service::Impl {
    ServiceConfig cfg;
    httplib::Server server;
    RunStore runs;
    ExpertQueue queue;
    std::mutex audit_mu;
    std::mutex launch_mu;
    std::vector<std::thread> launches;
    std::thread listener;
    int port = 0;

    explicit Impl(ServiceConfig c)
        : cfg(std::move(c)), runs(check_runs_dir(cfg.runs_dir)), queue(check_queue(cfg.queue_path)) {
        if (!cfg.store) throw Error(ErrorCode::StoreUnavailable, "no knowledge base store configured");
        // no SO_REUSEPORT, a second listener on the same port must fail
        server.set_socket_options([](socket_t sock) {
            int yes = 1;
            ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
        });
        routes();
    }

    static std::filesystem::path check_runs_dir(const std::filesystem::path& p) {
        std::error_code ec;
        if (p.empty()) throw Error(ErrorCode::StoreUnavailable, "runs directory not configured");
        std::filesystem::create_directories(p, ec);
        if (ec || !std::filesystem::is_directory(p)) {
            throw Error(ErrorCode::StoreUnavailable, "runs directory is unusable", p.string());
        }
        return p;
    }

    static std::filesystem::path check_queue(const std::filesystem::path& p) {
        if (p.empty()) throw Error(ErrorCode::StoreUnavailable, "queue path not configured");
        return p;
    }

    void audit(const httplib::Request& req, int status, const std::string& detail) {
        if (cfg.audit_log.empty()) return;
        json line{{"ts", now_ms()}, {"method", req.method}, {"path", req.path}, {"status", status}, {"detail", detail}};
        std::lock_guard lock(audit_mu);
        std::ofstream out(cfg.audit_log, std::ios::app);
        out << line.dump() << "\n";
    }

    bool authorized(const httplib::Request& req) const {
        return cfg.token.empty() || req.get_header_value("X-Auth-Token") == cfg.token;
    }

    using Fn = std::function<void(const httplib::Request&, httplib::Response&)>;

    // Wraps a handler with auth, error mapping and, for mutations, auditing.
    httplib::Server::Handler wrap(Fn fn, bool mutation) {
        return [this, fn = std::move(fn), mutation](const httplib::Request& req, httplib::Response& res) {
            std::string detail;
            if (!authorized(req)) {
                reply_error(res, 401, "Unauthorized", "missing or wrong X-Auth-Token");
                detail = "unauthorized";
            } else {
                try {
                    fn(req, res);
                } catch (const Error& e) {
                    reply(res, http_status(e.code()),
                          json{{"v", 1}, {"code", to_string(e.code())}, {"message", e.what()}, {"detail", e.detail()}});
                    detail = std::string(to_string(e.code()));
                } catch (const std::exception& e) {
                    reply_error(res, 500, "Internal", e.what());
                    detail = "internal";
                }
            }
            if (mutation) audit(req, res.status, detail);
        };
    }

    void routes() {
        server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            auto kb = cfg.store->snapshot();
            reply(res, 200, json{{"v", 1}, {"status", "ok"}, {"frozen", kb->frozen()}, {"tips", kb->size()}});
        });

        server.Get("/runs", wrap([this](const httplib::Request&, httplib::Response& res) {
            reply(res, 200, json{{"v", 1}, {"runs", runs.list()}});
        }, false));
        server.Get(R"(/runs/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
            reply(res, 200, runs.get(req.matches[1]));
        }, false));
        server.Get(R"(/runs/([^/]+)/events)", wrap([this](const httplib::Request& req, httplib::Response& res) {
            reply(res, 200, runs.events(req.matches[1], query_size(req, "from", 0), query_size(req, "limit", 500)));
        }, false));
        server.Get(R"(/runs/([^/]+)/screenshots/([^/]+))",
                   wrap([this](const httplib::Request& req, httplib::Response& res) {
                       res.set_content(runs.screenshot(req.matches[1], req.matches[2]), "image/png");
                   }, false));
        server.Post("/runs", wrap([this](const httplib::Request& req, httplib::Response& res) { launch(req, res); }, true));

        server.Get("/failures", wrap([this](const httplib::Request& req, httplib::Response& res) {
            std::optional<FailureStatus> status;
            if (req.has_param("status")) {
                auto s = req.get_param_value("status");
                if (s == "open") status = FailureStatus::open;
                else if (s == "resolved") status = FailureStatus::resolved;
                else throw Error(ErrorCode::InvalidArgument, "status must be open or resolved", s);
            }
            reply(res, 200, json{{"v", 1}, {"failures", queue.list(status)}});
        }, false));
        server.Get(R"(/failures/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
            reply(res, 200, json{{"v", 1}, {"failure", queue.get(req.matches[1])}});
        }, false));
        server.Post(R"(/failures/([^/]+)/resolve)", wrap([this](const httplib::Request& req, httplib::Response& res) {
            auto body = parse_body(req);
            auto tip = tip_from_body(body);
            if (tip.created_at.empty()) tip.created_at = iso_now();
            tip.source_failure_id = std::string(req.matches[1]);
            (void)queue.get(req.matches[1]);
            auto r = resolve_failure(queue, *cfg.store, req.matches[1], std::move(tip), cfg.run);
            reply(res, 200, json{{"v", 1}, {"failure", r.failure}, {"run", run_summary(r.rerun)}});
        }, true));

        server.Get("/tips", wrap([this](const httplib::Request& req, httplib::Response& res) {
            auto kb = cfg.store->snapshot();
            json tips = json::array();
            std::string domain = req.has_param("domain") ? req.get_param_value("domain") : "";
            for (const auto& [id, t] : kb->tips()) {
                if (domain.empty() || t.domain_label == domain) tips.push_back(t);
            }
            reply(res, 200, json{{"v", 1}, {"frozen", kb->frozen()}, {"tips", tips}});
        }, false));
        server.Get(R"(/tips/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
            auto kb = cfg.store->snapshot();
            const auto* t = kb->find(req.matches[1].str());
            if (!t) throw Error(ErrorCode::NotFound, "no such tip", req.matches[1]);
            reply(res, 200, json{{"v", 1}, {"tip", *t}});
        }, false));
        server.Post("/tips", wrap([this](const httplib::Request& req, httplib::Response& res) {
            auto tip = tip_from_body(parse_body(req));
            if (tip.created_at.empty()) tip.created_at = iso_now();
            cfg.store->add_tip(tip);
            reply(res, 201, json{{"v", 1}, {"tip", *cfg.store->snapshot()->find(tip.id)}});
        }, true));
        server.Put(R"(/tips/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
            auto tip = tip_from_body(parse_body(req));
            if (tip.id.empty()) tip.id = req.matches[1];
            if (tip.id != req.matches[1]) throw Error(ErrorCode::InvalidArgument, "tip id does not match the path", tip.id);
            if (tip.created_at.empty()) tip.created_at = iso_now();
            cfg.store->update_tip(tip);
            reply(res, 200, json{{"v", 1}, {"tip", *cfg.store->snapshot()->find(tip.id)}});
        }, true));
        server.Delete(R"(/tips/([^/]+))", wrap([this](const httplib::Request& req, httplib::Response& res) {
            cfg.store->remove_tip(req.matches[1].str());
            res.status = 204;
        }, true));
        server.Post("/akb/freeze", wrap([this](const httplib::Request&, httplib::Response& res) {
            cfg.store->freeze();
            reply(res, 200, json{{"v", 1}, {"frozen", true}});
        }, true));
    }

    void launch(const httplib::Request& req, httplib::Response& res) {
        auto body = parse_body(req);
        if (!cfg.suite) throw Error(ErrorCode::InvalidArgument, "no suite configured for launches");
        const auto& task = cfg.suite->task(body.value("task", ""));
        SuiteRunConfig rc = cfg.run;
        rc.record_dir = cfg.runs_dir;
        rc.run.ablation_mode = parse_ablation_mode(body.value("mode", "full"));
        if (body.contains("max_steps")) rc.run.max_steps = body["max_steps"].get<int>();
        rc.run.validate();
        json meta = json::object();
        if (body.contains("failure_id")) meta["resolution_of"] = body["failure_id"];
        auto run_id = make_run_id(task.goal.id);
        meta["requested_id"] = run_id;
        auto kb = cfg.store->snapshot();
        std::lock_guard lock(launch_mu);
        launches.emplace_back([task, kb, rc, meta, run_id] {
            SuiteRunConfig c = rc;
            auto spec = load_site_spec(task.site);
            auto site = std::make_shared<MockSite>(std::move(spec));
            WatchdogSession env([site] { return std::make_unique<MockSession>(site); });
            Agent agent;
            try {
                agent.model = c.model ? c.model(task) : default_model_factory(c.run.llm)(task);
            } catch (const Error&) {
            }
            RunOptions opts;
            opts.run_id = run_id;
            opts.record_dir = c.record_dir;
            opts.site_answer_spec = site->spec().answer_spec;
            opts.trigger = c.trigger;
            opts.meta = meta;
            opts.meta["task"] = task.to_json();
            run_task(task.goal, env, kb.get(), c.run, agent, opts);
        });
        reply(res, 202, json{{"v", 1}, {"run_id", run_id}, {"mode", to_string(rc.run.ablation_mode)}});
    }

    void join_launches() {
        std::vector<std::thread> pending;
        {
            std::lock_guard lock(launch_mu);
            pending.swap(launches);
        }
        for (auto& t : pending) t.join();
    }
};

Service::Service(ServiceConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

Service::~Service() {
    stop();
    wait_for_launches();
}

int Service::start() {
    auto& s = impl_->server;
    int port = impl_->cfg.port == 0 ? s.bind_to_any_port(impl_->cfg.host)
                                    : (s.bind_to_port(impl_->cfg.host, impl_->cfg.port) ? impl_->cfg.port : -1);
    if (port < 0) {
        throw Error(ErrorCode::BindFailure, "cannot bind", impl_->cfg.host + ":" + std::to_string(impl_->cfg.port));
    }
    impl_->port = port;
    impl_->listener = std::thread([&s] { s.listen_after_bind(); });
    s.wait_until_ready();
    return port;
}

void Service::run() {
    auto& s = impl_->server;
    if (!s.bind_to_port(impl_->cfg.host, impl_->cfg.port)) {
        throw Error(ErrorCode::BindFailure, "cannot bind", impl_->cfg.host + ":" + std::to_string(impl_->cfg.port));
    }
    s.listen_after_bind();
}

void Service::stop() {
    impl_->server.stop();
    if (impl_->listener.joinable()) impl_->listener.join();
}

void Service::wait_for_launches() { impl_->join_launches(); }

}  // namespace tipwise
