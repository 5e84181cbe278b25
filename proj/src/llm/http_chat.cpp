#include <httplib.h>

#include <thread>

#include "tipwise/core/error.hpp"
#include "tipwise/llm/chat.hpp"

namespace tipwise::llm {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix without trailing slash
};

Endpoint split_endpoint(const std::string& url) {
    auto scheme_end = url.find("://");
    if (url.empty() || scheme_end == std::string::npos) {
        throw Error(ErrorCode::ModelUnavailable, "LLM endpoint is not configured or not absolute", url);
    }
    auto path_begin = url.find('/', scheme_end + 3);
    Endpoint e;
    e.origin = url.substr(0, path_begin);
    if (path_begin != std::string::npos) e.prefix = url.substr(path_begin);
    while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
    return e;
}

httplib::Client make_client(const Endpoint& ep, const LlmEndpointConfig& cfg) {
    httplib::Client cli(ep.origin);
    auto timeout = std::chrono::milliseconds(cfg.timeout_ms);
    cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                               static_cast<time_t>((timeout.count() % 1000) * 1000));
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                         static_cast<time_t>((timeout.count() % 1000) * 1000));
    if (!cfg.api_key.empty()) cli.set_bearer_token_auth(cfg.api_key);
    return cli;
}

[[noreturn]] void throw_transport(httplib::Error err, const std::string& where) {
    switch (err) {
        case httplib::Error::ConnectionTimeout:
        case httplib::Error::Read:
            throw Error(ErrorCode::Timeout, "LLM endpoint timed out", where);
        default:
            throw Error(ErrorCode::ModelUnavailable, "LLM endpoint unreachable: " + httplib::to_string(err), where);
    }
}

}  // namespace

HttpChatModel::HttpChatModel(LlmEndpointConfig cfg, RetryPolicy retry) : cfg_(std::move(cfg)), retry_(std::move(retry)) {
    if (!retry_.sleep) retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ChatResponse HttpChatModel::complete(const ChatRequest& req) {
    for (int attempt = 0;; ++attempt) {
        try {
            return complete_once(req);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::RateLimited || attempt >= retry_.max_retries) throw;
            auto delay = retry_.base_delay * (1 << attempt);
            auto pos = e.detail().find("retry_after_ms=");
            if (pos != std::string::npos) {
                auto hinted = std::chrono::milliseconds(std::stoll(e.detail().substr(pos + 15)));
                delay = std::max(delay, hinted);
            }
            retry_.sleep(delay);
        }
    }
}

ChatResponse HttpChatModel::complete_once(const ChatRequest& req) {
    auto ep = split_endpoint(cfg_.url);
    auto cli = make_client(ep, cfg_);
    auto body = to_wire(req);
    if (body["model"].get<std::string>().empty()) body["model"] = cfg_.model_id;
    auto path = ep.prefix + "/chat/completions";
    auto res = cli.Post(path, body.dump(), "application/json");
    if (!res) throw_transport(res.error(), cfg_.url + path);
    if (res->status == 429) {
        std::string detail;
        if (res->has_header("Retry-After")) {
            try {
                detail = "retry_after_ms=" + std::to_string(std::stoll(res->get_header_value("Retry-After")) * 1000);
            } catch (const std::exception&) {
            }
        }
        throw Error(ErrorCode::RateLimited, "LLM endpoint rate limited the request", detail);
    }
    if (res->status >= 500) {
        throw Error(ErrorCode::ModelUnavailable, "LLM endpoint returned " + std::to_string(res->status), res->body);
    }
    if (res->status != 200) {
        throw Error(ErrorCode::Protocol, "LLM endpoint returned " + std::to_string(res->status), res->body);
    }
    try {
        auto j = json::parse(res->body);
        ChatResponse out;
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) throw Error(ErrorCode::Protocol, "choice content is not text");
        out.text = content.get<std::string>();
        if (j.contains("usage") && j["usage"].is_object()) {
            out.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
            out.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
        }
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Protocol, "malformed chat completion response", e.what());
    }
}

HttpEmbedder::HttpEmbedder(LlmEndpointConfig cfg, std::string model) : cfg_(std::move(cfg)), model_(std::move(model)) {}

std::vector<double> HttpEmbedder::embed(std::string_view text) const {
    auto ep = split_endpoint(cfg_.url);
    auto cli = make_client(ep, cfg_);
    json body{{"model", model_}, {"input", std::string(text)}};
    auto path = ep.prefix + "/embeddings";
    auto res = cli.Post(path, body.dump(), "application/json");
    if (!res) throw_transport(res.error(), cfg_.url + path);
    if (res->status != 200) {
        throw Error(ErrorCode::Protocol, "embedding endpoint returned " + std::to_string(res->status), res->body);
    }
    try {
        return json::parse(res->body).at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Protocol, "malformed embedding response", e.what());
    }
}

}  // namespace tipwise::llm
