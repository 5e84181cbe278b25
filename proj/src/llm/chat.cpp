#include "tipwise/llm/chat.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>

#include "tipwise/core/digest.hpp"
#include "tipwise/core/error.hpp"
#include "tipwise/core/fs.hpp"
#include "tipwise/core/text.hpp"

namespace tipwise::llm {

json to_wire(const ChatRequest& req) {
    json msgs = json::array();
    for (const auto& m : req.messages) msgs.push_back(json{{"role", m.role}, {"content", m.content}});
    json j{{"model", req.model_id}, {"messages", std::move(msgs)}, {"temperature", req.params.temperature}};
    if (req.params.max_tokens) j["max_tokens"] = *req.params.max_tokens;
    return j;
}

ChatRequest request_from_wire(const json& j) {
    ChatRequest r;
    r.model_id = j.at("model").get<std::string>();
    for (const auto& m : j.at("messages")) {
        r.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    }
    r.params.temperature = j.value("temperature", 0.0);
    if (j.contains("max_tokens")) r.params.max_tokens = j["max_tokens"].get<int>();
    return r;
}

json to_json(const ChatResponse& r) {
    return json{{"text", r.text},
                {"usage", {{"prompt_tokens", r.usage.prompt_tokens}, {"completion_tokens", r.usage.completion_tokens}}}};
}

ChatResponse response_from_json(const json& j) {
    ChatResponse r;
    r.text = j.at("text").get<std::string>();
    if (j.contains("usage")) {
        r.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        r.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
    return r;
}

std::string request_digest(const ChatRequest& req) {
    // nlohmann objects are std::map backed, so dump() is already key-sorted
    return sha256_hex(to_wire(req).dump());
}

std::string flatten(const ChatRequest& req) {
    std::string out;
    for (const auto& m : req.messages) {
        out += m.content;
        out += '\n';
    }
    return out;
}

// ---- scripted stub ---------------------------------------------------------

ScriptedChatModel::ScriptedChatModel(std::vector<StubRule> rules, std::optional<std::string> fallback)
    : rules_(std::move(rules)), used_(rules_.size(), 0), fallback_(std::move(fallback)) {}

namespace {

std::vector<std::string> string_or_list(const json& j) {
    if (j.is_null()) return {};
    if (j.is_string()) return {j.get<std::string>()};
    return j.get<std::vector<std::string>>();
}

}  // namespace

std::shared_ptr<ScriptedChatModel> ScriptedChatModel::from_json(const json& script) {
    std::vector<StubRule> rules;
    for (const auto& r : script.at("rules")) {
        StubRule rule;
        rule.match = string_or_list(r.value("match", json()));
        rule.unless = string_or_list(r.value("unless", json()));
        rule.reply = r.at("reply").get<std::string>();
        rule.times = r.value("times", -1);
        rules.push_back(std::move(rule));
    }
    std::optional<std::string> fallback;
    if (script.contains("fallback")) fallback = script["fallback"].get<std::string>();
    return std::make_shared<ScriptedChatModel>(std::move(rules), std::move(fallback));
}

std::shared_ptr<ScriptedChatModel> ScriptedChatModel::from_file(const std::filesystem::path& path) {
    try {
        return from_json(json::parse(fs::read_file(path)));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, "bad stub script " + path.string(), e.what());
    }
}

ChatResponse ScriptedChatModel::complete(const ChatRequest& req) {
    const auto text = flatten(req);
    std::lock_guard lock(mu_);
    seen_.push_back(req);
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        const auto& r = rules_[i];
        if (r.times >= 0 && used_[i] >= r.times) continue;
        bool ok = true;
        for (const auto& m : r.match) ok = ok && text.find(m) != std::string::npos;
        for (const auto& u : r.unless) ok = ok && text.find(u) == std::string::npos;
        if (!ok) continue;
        ++used_[i];
        return ChatResponse{r.reply, {static_cast<int>(text.size() / 4), static_cast<int>(r.reply.size() / 4)}};
    }
    if (fallback_) return ChatResponse{*fallback_, {static_cast<int>(text.size() / 4), 0}};
    throw Error(ErrorCode::ModelUnavailable, "no scripted reply matches the request", request_digest(req));
}

std::size_t ScriptedChatModel::calls() const {
    std::lock_guard lock(mu_);
    return seen_.size();
}

std::vector<ChatRequest> ScriptedChatModel::requests() const {
    std::lock_guard lock(mu_);
    return seen_;
}

// ---- cassette ----------------------------------------------------------------

CassetteChatModel::CassetteChatModel(std::filesystem::path path, Mode mode, std::shared_ptr<ChatModel> inner)
    : path_(std::move(path)), mode_(mode), inner_(std::move(inner)) {
    if (mode_ == Mode::record && !inner_) {
        throw Error(ErrorCode::InvalidArgument, "record mode needs an inner model");
    }
    if (!std::filesystem::exists(path_)) {
        if (mode_ == Mode::replay) throw Error(ErrorCode::NotFound, "cassette not found", path_.string());
        return;
    }
    for (const auto& line : text::split_lines(fs::read_file(path_))) {
        if (text::trim(line).empty()) continue;
        try {
            auto j = json::parse(line);
            records_.emplace(j.at("digest").get<std::string>(), response_from_json(j.at("response")));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::Protocol, "corrupt cassette record", e.what());
        }
    }
}

std::size_t CassetteChatModel::size() const {
    std::lock_guard lock(mu_);
    return records_.size();
}

ChatResponse CassetteChatModel::complete(const ChatRequest& req) {
    const auto digest = request_digest(req);
    {
        std::lock_guard lock(mu_);
        auto it = records_.find(digest);
        if (it != records_.end()) return it->second;
    }
    if (mode_ == Mode::replay) {
        throw Error(ErrorCode::CassetteMiss, "request not in cassette", digest);
    }
    ++inner_calls_;
    auto resp = inner_->complete(req);
    std::lock_guard lock(mu_);
    if (records_.emplace(digest, resp).second) {
        json rec{{"v", 1}, {"digest", digest}, {"request", to_wire(req)}, {"response", to_json(resp)}};
        auto line = rec.dump() + "\n";
        int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
        if (fd < 0) throw Error(ErrorCode::Io, "cannot open cassette", path_.string());
        ::flock(fd, LOCK_EX);
        auto written = ::write(fd, line.data(), line.size());
        ::flock(fd, LOCK_UN);
        ::close(fd);
        if (written != static_cast<ssize_t>(line.size())) {
            throw Error(ErrorCode::Io, "short write to cassette", path_.string());
        }
    }
    return resp;
}

LlmEndpointConfig endpoint_from_env(LlmEndpointConfig base) {
    if (const char* v = std::getenv("TIPWISE_LLM_ENDPOINT")) base.url = v;
    if (const char* v = std::getenv("TIPWISE_LLM_API_KEY")) base.api_key = v;
    if (const char* v = std::getenv("TIPWISE_LLM_MODEL")) base.model_id = v;
    return base;
}

}  // namespace tipwise::llm
