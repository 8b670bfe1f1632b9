#include "rgbx/chat_client.hpp"

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "rgbx/errors.hpp"

namespace rgbx {

ChatReply ScriptedChatClient::complete(const ChatRequest& request) {
    std::scoped_lock lock(mutex_);
    requests_.push_back(request);
    if (script_.empty()) {
        return failed_reply("scripted client has no replies");
    }
    const std::size_t idx = static_cast<std::size_t>(calls_++);
    if (idx < script_.size()) {
        return script_[idx];
    }
    if (wrap_) {
        return script_[idx % script_.size()];
    }
    return failed_reply("scripted client exhausted");
}

namespace {

class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(EndpointConfig cfg) : cfg_(std::move(cfg)) {
        const char* base = std::getenv(cfg_.base_url_env.c_str());
        if (base == nullptr || *base == '\0') {
            throw ConfigError("endpoint base URL env var " + cfg_.base_url_env + " is not set");
        }
        base_url_ = base;
        if (const char* key = std::getenv(cfg_.api_key_env.c_str())) {
            api_key_ = key;
        }
    }

    ChatReply complete(const ChatRequest& request) override {
        std::string content = request.prompt;
        for (const auto& path : request.image_paths) {
            content += "\n[image] " + path;
        }
        nlohmann::json body;
        body["model"] = cfg_.model;
        body["messages"] = nlohmann::json::array(
            {{{"role", "user"}, {"content", content}}});

        // One client per request keeps the call thread-safe.
        httplib::Client http(base_url_);
        http.set_connection_timeout(cfg_.timeout_seconds);
        http.set_read_timeout(cfg_.timeout_seconds);
        httplib::Headers headers;
        if (!api_key_.empty()) {
            headers.emplace("Authorization", "Bearer " + api_key_);
        }
        auto res = http.Post(cfg_.path, headers, body.dump(), "application/json");
        if (!res) {
            return failed_reply("transport error: " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            return failed_reply("endpoint returned HTTP " + std::to_string(res->status));
        }
        const auto j = nlohmann::json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
            return failed_reply("malformed endpoint reply");
        }
        const auto& msg = j["choices"][0];
        if (!msg.contains("message") || !msg["message"].contains("content")) {
            return failed_reply("malformed endpoint reply");
        }
        return ok_reply(msg["message"]["content"].get<std::string>());
    }

private:
    EndpointConfig cfg_;
    std::string base_url_;
    std::string api_key_;
};

} // namespace

std::unique_ptr<ChatClient> make_http_chat_client(const EndpointConfig& cfg) {
    return std::make_unique<HttpChatClient>(cfg);
}

} // namespace rgbx
