#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace rgbx {

struct ChatRequest {
    std::string prompt;
    std::vector<std::string> image_paths;  // referenced by path; inlining is an adapter concern
};

struct ChatReply {
    bool ok = false;
    std::string content;
    std::string error;
};

/// A chat-completion endpoint. Implementations must be safe to call from
/// multiple threads.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ChatReply complete(const ChatRequest& request) = 0;
};

struct EndpointConfig {
    std::string base_url_env = "GENERATOR_BASE_URL";
    std::string api_key_env = "GENERATOR_API_KEY";
    std::string model = "default";
    std::string path = "/v1/chat/completions";
    int timeout_seconds = 60;
};

/// HTTP JSON client for OpenAI-style chat-completion endpoints. The base
/// URL and bearer token come from environment variables named in the
/// config. Images are referenced in the message text (text-only fallback).
std::unique_ptr<ChatClient> make_http_chat_client(const EndpointConfig& cfg);

/// Fixed-script client for tests and offline runs: replies are served in
/// order, then the script wraps around (or fails, when configured).
class ScriptedChatClient : public ChatClient {
public:
    explicit ScriptedChatClient(std::vector<ChatReply> script, bool wrap = true)
        : script_(std::move(script)), wrap_(wrap) {}

    ChatReply complete(const ChatRequest& request) override;
    int calls() const { return calls_; }
    const std::vector<ChatRequest>& requests() const { return requests_; }

private:
    std::vector<ChatReply> script_;
    bool wrap_;
    int calls_ = 0;
    std::vector<ChatRequest> requests_;
    std::mutex mutex_;
};

inline ChatReply ok_reply(std::string content) {
    return ChatReply{true, std::move(content), ""};
}
inline ChatReply failed_reply(std::string error) {
    return ChatReply{false, "", std::move(error)};
}

} // namespace rgbx
