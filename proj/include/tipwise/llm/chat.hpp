#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tipwise/akb/embedder.hpp"
#include "tipwise/core/types.hpp"

namespace tipwise::llm {

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

struct ChatParams {
    double temperature = 0.0;
    std::optional<int> max_tokens;
    bool operator==(const ChatParams&) const = default;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    std::string model_id;
    ChatParams params;
};

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct ChatResponse {
    std::string text;
    Usage usage;
};

/// Chat-completions request body: `{model, messages, temperature[, max_tokens]}`.
json to_wire(const ChatRequest& req);
ChatRequest request_from_wire(const json& j);
json to_json(const ChatResponse& r);
ChatResponse response_from_json(const json& j);

/// SHA-256 over the canonical (key-sorted, compact) wire form.
std::string request_digest(const ChatRequest& req);

/// All message contents joined by newlines; what stub rules match against.
std::string flatten(const ChatRequest& req);

class ChatModel {
public:
    virtual ~ChatModel() = default;
    /// Errors: Timeout, RateLimited, Protocol, ModelUnavailable, CassetteMiss.
    virtual ChatResponse complete(const ChatRequest& req) = 0;
    virtual std::string name() const = 0;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_delay{500};
    std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
};

/// OpenAI-compatible `POST {endpoint}/chat/completions` client. The
/// endpoint may carry a path prefix such as `/v1`.
class HttpChatModel final : public ChatModel {
public:
    explicit HttpChatModel(LlmEndpointConfig cfg, RetryPolicy retry = {});
    ChatResponse complete(const ChatRequest& req) override;
    std::string name() const override { return "http:" + cfg_.model_id; }

private:
    ChatResponse complete_once(const ChatRequest& req);

    LlmEndpointConfig cfg_;
    RetryPolicy retry_;
};

/// One stub rule. `match` substrings must all occur in the flattened
/// request, `unless` substrings must all be absent. `times` < 0 means
/// unlimited.
struct StubRule {
    std::vector<std::string> match;
    std::vector<std::string> unless;
    std::string reply;
    int times = -1;
};

/// Deterministic scripted backend; first applicable rule wins.
class ScriptedChatModel final : public ChatModel {
public:
    explicit ScriptedChatModel(std::vector<StubRule> rules, std::optional<std::string> fallback = std::nullopt);
    /// `{rules:[{match, unless?, reply, times?}], fallback?}`; `match` may be a string or a list.
    static std::shared_ptr<ScriptedChatModel> from_json(const json& script);
    static std::shared_ptr<ScriptedChatModel> from_file(const std::filesystem::path& path);

    ChatResponse complete(const ChatRequest& req) override;
    std::string name() const override { return "stub"; }

    std::size_t calls() const;
    std::vector<ChatRequest> requests() const;

private:
    mutable std::mutex mu_;
    std::vector<StubRule> rules_;
    std::vector<int> used_;
    std::optional<std::string> fallback_;
    std::vector<ChatRequest> seen_;
};

/// Digest-keyed record/replay store. In record mode every miss is served by
/// `inner` and appended to the cassette file; in replay mode a miss is a
/// CassetteMiss naming the digest.
class CassetteChatModel final : public ChatModel {
public:
    enum class Mode { record, replay };

    CassetteChatModel(std::filesystem::path path, Mode mode, std::shared_ptr<ChatModel> inner = nullptr);
    ChatResponse complete(const ChatRequest& req) override;
    std::string name() const override { return "cassette"; }

    std::size_t inner_calls() const { return inner_calls_; }
    std::size_t size() const;

private:
    std::filesystem::path path_;
    Mode mode_;
    std::shared_ptr<ChatModel> inner_;
    mutable std::mutex mu_;
    std::map<std::string, ChatResponse> records_;
    std::atomic<std::size_t> inner_calls_{0};
};

/// Endpoint settings from TIPWISE_LLM_ENDPOINT, TIPWISE_LLM_API_KEY and
/// TIPWISE_LLM_MODEL over `base`.
LlmEndpointConfig endpoint_from_env(LlmEndpointConfig base = {});

/// `POST {endpoint}/embeddings` client for the retrieval embedding port.
class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(LlmEndpointConfig cfg, std::string model);
    std::vector<double> embed(std::string_view text) const override;
    std::string name() const override { return "http:" + model_; }

private:
    LlmEndpointConfig cfg_;
    std::string model_;
};

}  // namespace tipwise::llm
