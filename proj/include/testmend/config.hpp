#pragma once

#include "testmend/gateway.hpp"
#include "testmend/runner.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace testmend {

struct LlmConfig {
    std::string backend = "replay";  // replay | record | live
    std::string endpoint = "http://localhost:8080";
    std::string api_path = "/v1/chat/completions";
    std::string model = "default";
    GenParams repair{};                    // temperature 0.4, top_p 0.4, top_k 250
    GenParams mining{0.9, 0.9, 250, 4096, std::nullopt};
    std::filesystem::path replay_store = "replay.json";
};

struct PathsConfig {
    std::filesystem::path sandbox_root = ".testmend/sandboxes";
    std::filesystem::path session_store = ".testmend/sessions.jsonl";
};

struct Config {
    RunnerConfig runner;
    LlmConfig llm;
    int budget_af = 5;
    int budget_cc = 10;
    int injection_rounds = 3;
    int stability_runs = 10;
    PathsConfig paths;
    uint64_t seed = 1;
    int workers = 1;
    std::filesystem::path change_catalog;  // empty: builtin 51-entry catalog

    static Config load(const std::filesystem::path& path);
    static Config from_json_text(const std::string& text);
    std::string to_json_text() const;
    void validate() const;
    int budget_for(bool coverage_mode) const { return coverage_mode ? budget_cc : budget_af; }
};

} // namespace testmend
