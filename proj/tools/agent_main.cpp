// agent: command-line entry point for runs, benchmarks, adaptation and the
// workbench service.

#include <CLI11.hpp>

#include <csignal>
#include <iostream>
#include <sstream>

#include "tipwise/core/fs.hpp"
#include "tipwise/core/text.hpp"
#include "tipwise/orchestrator/bench.hpp"
#include "tipwise/service/service.hpp"

using namespace tipwise;

namespace {

struct ModelFlags {
    std::string endpoint;
    std::string model;
    std::string script;
    std::string cassette;
    std::string cassette_mode = "replay";

    void add(CLI::App* app) {
        app->add_option("--llm-endpoint", endpoint, "OpenAI-compatible base URL (else TIPWISE_LLM_ENDPOINT)");
        app->add_option("--model", model, "model id (else TIPWISE_LLM_MODEL)");
        app->add_option("--script", script, "scripted backend JSON used instead of a live model");
        app->add_option("--cassette", cassette, "record/replay file wrapped around the backend");
        app->add_option("--cassette-mode", cassette_mode, "record|replay")->check(CLI::IsMember({"record", "replay"}));
    }

    LlmEndpointConfig endpoint_config() const {
        LlmEndpointConfig base = llm::endpoint_from_env();
        if (!endpoint.empty()) base.url = endpoint;
        if (!model.empty()) base.model_id = model;
        return base;
    }

    ModelFactory factory() const {
        auto llm = endpoint_config();
        ModelFactory inner = default_model_factory(llm);
        if (!script.empty()) {
            auto path = script;
            inner = [path](const SuiteTask&) -> std::shared_ptr<llm::ChatModel> {
                return llm::ScriptedChatModel::from_file(path);
            };
        }
        if (cassette.empty()) return inner;
        auto mode = cassette_mode == "record" ? llm::CassetteChatModel::Mode::record : llm::CassetteChatModel::Mode::replay;
        auto path = cassette;
        return [inner, mode, path](const SuiteTask& t) -> std::shared_ptr<llm::ChatModel> {
            std::shared_ptr<llm::ChatModel> backend;
            if (mode == llm::CassetteChatModel::Mode::record) backend = inner(t);
            return std::make_shared<llm::CassetteChatModel>(path, mode, backend);
        };
    }
};

struct RunFlags {
    int max_steps = 30;
    std::size_t budget = 4096;
    std::string record;

    void add(CLI::App* app) {
        app->add_option("--max-steps", max_steps, "step cap")->check(CLI::PositiveNumber);
        app->add_option("--belief-budget", budget, "belief size cap in characters");
        app->add_option("--record", record, "runs directory to write trajectories into");
    }
};

std::vector<AblationMode> parse_modes(const std::string& csv) {
    std::vector<AblationMode> out;
    std::istringstream in(csv);
    std::string part;
    while (std::getline(in, part, ',')) {
        auto m = text::trim(part);
        if (!m.empty()) out.push_back(parse_ablation_mode(m));
    }
    if (out.empty()) throw Error(ErrorCode::InvalidArgument, "no modes given");
    return out;
}

SuiteRunConfig suite_config(const ModelFlags& mf, const RunFlags& rf, AblationMode mode) {
    SuiteRunConfig cfg;
    cfg.run.max_steps = rf.max_steps;
    cfg.run.belief_budget_chars = rf.budget;
    cfg.run.ablation_mode = mode;
    cfg.run.llm = mf.endpoint_config();
    cfg.model = mf.factory();
    cfg.record_dir = rf.record;
    cfg.run.validate();
    return cfg;
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

Service* g_service = nullptr;

void on_signal(int) {
    if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-guided browser agent runtime"};
    app.require_subcommand(1);

    // agent run
    auto* run = app.add_subcommand("run", "run one goal against a mock site");
    std::string goal_file, site_file, akb_path, mode_name = "full";
    ModelFlags run_model;
    RunFlags run_flags;
    run->add_option("--goal", goal_file, "goal JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--site", site_file, "site spec JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--akb", akb_path, "knowledge base file");
    run->add_option("--mode", mode_name, "full|no_knowledge|no_summarizer|vanilla");
    run_model.add(run);
    run_flags.add(run);

    // agent bench
    auto* benchc = app.add_subcommand("bench", "run a suite in one or more modes");
    std::string suite_dir, bench_akb, modes_csv = "full", report_path;
    bool protocol = false, parallel = false;
    ModelFlags bench_model;
    RunFlags bench_flags;
    benchc->add_option("--suite", suite_dir, "suite directory")->required()->check(CLI::ExistingDirectory);
    benchc->add_option("--akb", bench_akb, "knowledge base file");
    benchc->add_option("--modes", modes_csv, "comma separated modes, or 'all'");
    benchc->add_flag("--protocol", protocol, "frozen-knowledge evaluation protocol");
    benchc->add_flag("--parallel", parallel, "run tasks concurrently (not with --protocol)");
    benchc->add_option("--report", report_path, "write the JSON report here");
    bench_model.add(benchc);
    bench_flags.add(benchc);

    // agent adapt
    auto* adapt = app.add_subcommand("adapt", "offline adaptation pass: run tasks, enqueue failures");
    std::string adapt_suite, adapt_akb, queue_path, adapt_mode = "full";
    ModelFlags adapt_model;
    RunFlags adapt_flags;
    adapt->add_option("--suite", adapt_suite, "suite directory")->required()->check(CLI::ExistingDirectory);
    adapt->add_option("--akb", adapt_akb, "knowledge base file")->required();
    adapt->add_option("--queue", queue_path, "expert queue file")->required();
    adapt->add_option("--mode", adapt_mode, "ablation mode");
    adapt_model.add(adapt);
    adapt_flags.add(adapt);

    // agent failures / resolve
    auto* failures = app.add_subcommand("failures", "list the expert queue");
    std::string failures_queue, failures_status;
    failures->add_option("--queue", failures_queue, "expert queue file")->required();
    failures->add_option("--status", failures_status, "open|resolved");

    auto* resolve = app.add_subcommand("resolve", "inject a tip for a failure and re-run it");
    std::string resolve_queue, resolve_akb, failure_id, tip_file;
    ModelFlags resolve_model;
    RunFlags resolve_flags;
    resolve->add_option("--queue", resolve_queue, "expert queue file")->required();
    resolve->add_option("--akb", resolve_akb, "knowledge base file")->required();
    resolve->add_option("--failure", failure_id, "failure id")->required();
    resolve->add_option("--tip", tip_file, "tip JSON")->required()->check(CLI::ExistingFile);
    resolve_model.add(resolve);
    resolve_flags.add(resolve);

    // agent serve
    auto* serve = app.add_subcommand("serve", "workbench HTTP API");
    ServiceConfig scfg;
    std::string serve_akb, serve_suite, runs_dir = "runs", serve_queue = "queue.json";
    ModelFlags serve_model;
    serve->add_option("--port", scfg.port, "listen port");
    serve->add_option("--host", scfg.host, "listen address");
    serve->add_option("--token", scfg.token, "shared X-Auth-Token (else TIPWISE_SERVICE_TOKEN)");
    serve->add_option("--akb", serve_akb, "knowledge base file")->required();
    serve->add_option("--queue", serve_queue, "expert queue file");
    serve->add_option("--runs", runs_dir, "runs directory");
    serve->add_option("--audit", scfg.audit_log, "audit log (JSON lines)");
    serve->add_option("--suite", serve_suite, "suite whose tasks POST /runs may launch");
    serve_model.add(serve);

    // agent akb ...
    auto* akb = app.add_subcommand("akb", "knowledge base maintenance");
    akb->require_subcommand(1);
    std::string store_path;
    akb->add_option("--akb", store_path, "knowledge base file")->required();
    auto* import = akb->add_subcommand("import", "add every tip of a corpus file (all or nothing)");
    std::string import_file;
    import->add_option("file", import_file, "AKB document or JSON array of tips")->required()->check(CLI::ExistingFile);
    auto* exportc = akb->add_subcommand("export", "print the knowledge base document");
    std::string export_file;
    exportc->add_option("--out", export_file, "write to a file instead of stdout");
    auto* stats = akb->add_subcommand("stats", "tip counts per domain");
    auto* freeze = akb->add_subcommand("freeze", "freeze the knowledge base (irreversible)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            auto goal = json::parse(fs::read_file(goal_file)).get<Goal>();
            SuiteTask task;
            task.goal = goal;
            task.site = site_file;
            auto cfg = suite_config(run_model, run_flags, parse_ablation_mode(mode_name));
            std::shared_ptr<const KnowledgeBase> kb;
            if (!akb_path.empty()) kb = AkbStore(akb_path).snapshot();
            auto result = run_suite_task(task, kb.get(), cfg);
            print(run_summary(result));
            return result.status() == RunStatus::success ? 0 : 1;
        }
        if (benchc->parsed()) {
            auto suite = load_suite(suite_dir);
            BenchConfig cfg;
            cfg.base = suite_config(bench_model, bench_flags, AblationMode::full);
            cfg.modes = modes_csv == "all" ? std::vector<AblationMode>{AblationMode::full, AblationMode::no_knowledge,
                                                                      AblationMode::no_summarizer, AblationMode::vanilla}
                                           : parse_modes(modes_csv);
            cfg.protocol = protocol;
            cfg.parallel = parallel;
            std::shared_ptr<const KnowledgeBase> kb =
                bench_akb.empty() ? std::make_shared<const KnowledgeBase>() : AkbStore(bench_akb).snapshot();
            auto report = bench(suite, kb, cfg);
            std::cout << render_table(report);
            if (!report_path.empty()) fs::write_file_atomic(report_path, to_json(report).dump(2) + "\n");
            return 0;
        }
        if (adapt->parsed()) {
            auto suite = load_suite(adapt_suite);
            AkbStore store(adapt_akb);
            ExpertQueue queue(queue_path);
            auto report = adaptation_loop(suite, store, queue, suite_config(adapt_model, adapt_flags,
                                                                             parse_ablation_mode(adapt_mode)));
            print(report.to_json());
            return 0;
        }
        if (failures->parsed()) {
            ExpertQueue queue(failures_queue);
            std::optional<FailureStatus> st;
            if (failures_status == "open") st = FailureStatus::open;
            if (failures_status == "resolved") st = FailureStatus::resolved;
            print(json{{"v", 1}, {"failures", queue.list(st)}});
            return 0;
        }
        if (resolve->parsed()) {
            ExpertQueue queue(resolve_queue);
            AkbStore store(resolve_akb);
            auto tip = json::parse(fs::read_file(tip_file)).get<KnowledgeTip>();
            tip.source_failure_id = failure_id;
            auto r = resolve_failure(queue, store, failure_id, std::move(tip),
                                     suite_config(resolve_model, resolve_flags, AblationMode::full));
            print(json{{"v", 1}, {"failure", r.failure}, {"run", run_summary(r.rerun)}});
            return r.rerun.status() == RunStatus::success ? 0 : 1;
        }
        if (serve->parsed()) {
            if (scfg.token.empty()) {
                if (const char* t = std::getenv("TIPWISE_SERVICE_TOKEN")) scfg.token = t;
            }
            scfg.store = std::make_shared<AkbStore>(serve_akb);
            scfg.runs_dir = runs_dir;
            scfg.queue_path = serve_queue;
            if (!serve_suite.empty()) scfg.suite = load_suite(serve_suite);
            scfg.run = suite_config(serve_model, RunFlags{}, AblationMode::full);
            scfg.run.record_dir = runs_dir;
            Service service(scfg);
            g_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on " << scfg.host << ":" << scfg.port << "\n";
            service.run();
            g_service = nullptr;
            return 0;
        }
        if (akb->parsed()) {
            AkbStore store(store_path);
            if (import->parsed()) {
                auto n = store.import_tips(load_tip_corpus(import_file));
                std::cout << "imported " << n << " tips\n";
            } else if (exportc->parsed()) {
                auto doc = store.snapshot()->to_json().dump(2) + "\n";
                if (export_file.empty()) std::cout << doc;
                else fs::write_file_atomic(export_file, doc);
            } else if (stats->parsed()) {
                auto kb = store.snapshot();
                json counts = kb->domain_counts();
                print(json{{"v", 1}, {"total", kb->size()}, {"frozen", kb->frozen()}, {"domains", counts}});
            } else if (freeze->parsed()) {
                store.freeze();
                std::cout << "frozen\n";
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what();
        if (!e.detail().empty()) std::cerr << " (" << e.detail() << ")";
        std::cerr << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
