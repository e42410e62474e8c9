#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace testmend {

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
};

using ChatHistory = std::vector<ChatMessage>;

struct GenParams {
    double temperature = 0.4;
    double top_p = 0.4;
    int top_k = 250;
    int max_tokens = 4096;
    std::optional<long> seed;
};

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ReplayMiss : public std::runtime_error {
public:
    ReplayMiss(const std::string& key, const std::string& message)
        : std::runtime_error(message), key_(key) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// Content-addressed key over the serialized history and parameters.
std::string request_key(const ChatHistory& history, const GenParams& params);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const ChatHistory& history, const GenParams& params) = 0;
};

// One JSON file: object mapping hex key -> response text. Constructing from
// a path loads any existing entries.
class ReplayStore {
public:
    ReplayStore() = default;
    explicit ReplayStore(std::filesystem::path path);

    void save() const;

    void put(const ChatHistory& history, const GenParams& params, const std::string& response);
    void put_raw(const std::string& key, const std::string& response);
    std::optional<std::string> get(const std::string& key) const;
    size_t size() const { return entries_.size(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::map<std::string, std::string> entries_;
    mutable std::mutex mu_;
};

class ReplayBackend : public ChatBackend {
public:
    explicit ReplayBackend(std::shared_ptr<ReplayStore> store) : store_(std::move(store)) {}
    std::string complete(const ChatHistory& history, const GenParams& params) override;

private:
    std::shared_ptr<ReplayStore> store_;
};

// Delegates to an inner backend and persists every response.
class RecordingBackend : public ChatBackend {
public:
    RecordingBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<ReplayStore> store)
        : inner_(std::move(inner)), store_(std::move(store)) {}
    std::string complete(const ChatHistory& history, const GenParams& params) override;

private:
    std::shared_ptr<ChatBackend> inner_;
    std::shared_ptr<ReplayStore> store_;
};

// JSON-over-HTTP chat API. Token read from TESTMEND_LLM_TOKEN.
class LiveBackend : public ChatBackend {
public:
    LiveBackend(std::string endpoint, std::string model, std::string api_path = "/v1/chat/completions");
    std::string complete(const ChatHistory& history, const GenParams& params) override;

private:
    std::string endpoint_;
    std::string model_;
    std::string api_path_;
};

// Per-session history with enforced monotonic growth.
class ChatSession {
public:
    ChatSession(ChatBackend& backend, GenParams params)
        : backend_(backend), params_(std::move(params)) {}

    void set_system(const std::string& content);
    std::string send_user(const std::string& content);
    // Pre-built history turn (used when the prompt builder owns the layout).
    std::string send(const ChatHistory& full_history);

    const ChatHistory& history() const { return history_; }
    int calls() const { return calls_; }

private:
    ChatBackend& backend_;
    GenParams params_;
    ChatHistory history_;
    int calls_ = 0;
};

} // namespace testmend
