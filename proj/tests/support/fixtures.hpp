#pragma once

#include "testmend/config.hpp"
#include "testmend/gateway.hpp"
#include "testmend/util.hpp"

#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace testmend::testing {

namespace fs = std::filesystem;

inline fs::path source_dir() {
#ifdef TESTMEND_SOURCE_DIR
    return fs::path(TESTMEND_SOURCE_DIR);
#else
    return fs::current_path();
#endif
}

inline fs::path miniproj_dir() {
    return source_dir() / "tests" / "fixtures" / "miniproj";
}

inline fs::path goldens_dir() {
    return source_dir() / "tests" / "goldens";
}

inline fs::path pycov_runner() {
    return source_dir() / "tools" / "pycov_runner.py";
}

// Working area for one test; removed on destruction.
struct TempDir {
    fs::path path;

    explicit TempDir(const std::string& tag) {
        path = make_unique_dir(fs::temp_directory_path() / "testmend-tests", tag);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

// Runner config wired to the stdlib coverage wrapper.
inline RunnerConfig fixture_runner() {
    RunnerConfig runner;
    runner.command_template = "python3 '" + pycov_runner().string() +
                              "' {test_id} --report {report_path}";
    runner.timeout_s = 120.0;
    return runner;
}

inline Config fixture_config(const fs::path& work) {
    Config config;
    config.runner = fixture_runner();
    config.paths.sandbox_root = work / "sandboxes";
    config.paths.session_store = work / "sessions.jsonl";
    config.llm.replay_store = work / "replay.json";
    config.stability_runs = 10;
    return config;
}

// Test backend scripted per test name: the k-th call whose prompt mentions
// `marker` returns responses[k] (clamped to the last entry).
class ScriptedBackend : public ChatBackend {
public:
    ScriptedBackend() = default;
    ScriptedBackend(const ScriptedBackend& other)
        : scripts_(other.scripts_), calls_(other.calls_) {}

    void script(const std::string& marker, std::vector<std::string> responses) {
        scripts_[marker] = std::move(responses);
    }

    std::string complete(const ChatHistory& history, const GenParams&) override {
        std::lock_guard<std::mutex> lock(mu_);
        std::string all;
        for (const auto& msg : history) {
            all += msg.content;
            all += "\n";
        }
        for (auto& [marker, responses] : scripts_) {
            if (all.find(marker) == std::string::npos) {
                continue;
            }
            size_t& count = calls_[marker];
            const size_t idx = count < responses.size() ? count : responses.size() - 1;
            ++count;
            return responses[idx];
        }
        return "<no script matched>";
    }

    size_t calls(const std::string& marker) const {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = calls_.find(marker);
        return it == calls_.end() ? 0 : it->second;
    }

private:
    std::map<std::string, std::vector<std::string>> scripts_;
    std::map<std::string, size_t> calls_;
    mutable std::mutex mu_;
};

// Counts completions; wraps any backend.
class CountingBackend : public ChatBackend {
public:
    explicit CountingBackend(ChatBackend& inner) : inner_(inner) {}
    std::string complete(const ChatHistory& history, const GenParams& params) override {
        ++count_;
        return inner_.complete(history, params);
    }
    int count() const { return count_; }

private:
    ChatBackend& inner_;
    int count_ = 0;
};

inline std::string wrap_repair(const std::string& test_source,
                               const std::string& modification = "adjust assertion") {
    return "<root>\n<modification_type>" + modification + "</modification_type>\n" +
           "<repaired_test_method>\n" + test_source + "\n</repaired_test_method>\n</root>";
}

} // namespace testmend::testing
