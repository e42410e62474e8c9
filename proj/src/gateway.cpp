#include "testmend/gateway.hpp"

#include "testmend/util.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>

// httplib pulls in a lot; keep it confined to this translation unit.
#include <httplib.h>

namespace testmend {

using json = nlohmann::json;

std::string request_key(const ChatHistory& history, const GenParams& params) {
    json doc;
    doc["messages"] = json::array();
    for (const ChatMessage& msg : history) {
        doc["messages"].push_back({{"role", msg.role}, {"content", msg.content}});
    }
    doc["params"] = {
        {"temperature", params.temperature},
        {"top_p", params.top_p},
        {"top_k", params.top_k},
        {"max_tokens", params.max_tokens},
    };
    if (params.seed) {
        doc["params"]["seed"] = *params.seed;
    }
    return sha256_hex(doc.dump());
}

ReplayStore::ReplayStore(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) {
        json doc = json::parse(read_file(path_));
        for (auto& [key, value] : doc.items()) {
            entries_[key] = value.get<std::string>();
        }
    }
}

void ReplayStore::save() const {
    std::lock_guard<std::mutex> lock(mu_);
    if (path_.empty()) {
        return;
    }
    json doc = json::object();
    for (const auto& [key, value] : entries_) {
        doc[key] = value;
    }
    write_file(path_, doc.dump(1) + "\n");
}

void ReplayStore::put(const ChatHistory& history, const GenParams& params,
                      const std::string& response) {
    put_raw(request_key(history, params), response);
}

void ReplayStore::put_raw(const std::string& key, const std::string& response) {
    std::lock_guard<std::mutex> lock(mu_);
    entries_[key] = response;
}

std::optional<std::string> ReplayStore::get(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::string ReplayBackend::complete(const ChatHistory& history, const GenParams& params) {
    const std::string key = request_key(history, params);
    std::optional<std::string> hit = store_->get(key);
    if (!hit) {
        throw ReplayMiss(key, "replay store has no response for key " + key);
    }
    return *hit;
}

std::string RecordingBackend::complete(const ChatHistory& history, const GenParams& params) {
    std::string response = inner_->complete(history, params);
    store_->put(history, params, response);
    store_->save();
    return response;
}

LiveBackend::LiveBackend(std::string endpoint, std::string model, std::string api_path)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), api_path_(std::move(api_path)) {}

std::string LiveBackend::complete(const ChatHistory& history, const GenParams& params) {
    json payload;
    payload["model"] = model_;
    payload["messages"] = json::array();
    for (const ChatMessage& msg : history) {
        payload["messages"].push_back({{"role", msg.role}, {"content", msg.content}});
    }
    payload["temperature"] = params.temperature;
    payload["top_p"] = params.top_p;
    payload["top_k"] = params.top_k;
    payload["max_tokens"] = params.max_tokens;
    if (params.seed) {
        payload["seed"] = *params.seed;
    }

    httplib::Client client(endpoint_);
    client.set_read_timeout(300, 0);
    httplib::Headers headers;
    if (const char* token = std::getenv("TESTMEND_LLM_TOKEN")) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
    }
    auto result = client.Post(api_path_, headers, payload.dump(), "application/json");
    if (!result) {
        throw TransportError("chat endpoint unreachable: " + endpoint_);
    }
    if (result->status < 200 || result->status >= 300) {
        throw TransportError("chat endpoint returned status " + std::to_string(result->status));
    }
    json doc = json::parse(result->body, nullptr, false);
    if (doc.is_discarded()) {
        throw TransportError("chat endpoint returned invalid JSON");
    }
    if (doc.contains("choices") && !doc["choices"].empty()) {
        return doc["choices"][0]["message"]["content"].get<std::string>();
    }
    if (doc.contains("content") && doc["content"].is_array() && !doc["content"].empty()) {
        return doc["content"][0].value("text", "");
    }
    throw TransportError("chat endpoint response has no completion text");
}

void ChatSession::set_system(const std::string& content) {
    if (!history_.empty()) {
        throw std::logic_error("system message must come first");
    }
    history_.push_back({"system", content});
}

std::string ChatSession::send_user(const std::string& content) {
    history_.push_back({"user", content});
    std::string response = backend_.complete(history_, params_);
    ++calls_;
    history_.push_back({"assistant", response});
    return response;
}

std::string ChatSession::send(const ChatHistory& full_history) {
    // Enforce prefix-extension: the new history must extend the old one.
    if (full_history.size() < history_.size()) {
        throw std::logic_error("chat history must grow monotonically");
    }
    for (size_t i = 0; i < history_.size(); ++i) {
        if (history_[i].role != full_history[i].role ||
            history_[i].content != full_history[i].content) {
            throw std::logic_error("chat history prefix was modified");
        }
    }
    history_ = full_history;
    std::string response = backend_.complete(history_, params_);
    ++calls_;
    history_.push_back({"assistant", response});
    return response;
}

} // namespace testmend
