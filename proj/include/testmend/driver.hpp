#pragma once

#include "testmend/config.hpp"
#include "testmend/miner.hpp"
#include "testmend/repair.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace testmend {

// One benchmark.jsonl line; carries full sources so repair runs without the
// miner.
struct BenchmarkCase {
    std::string kind;  // "injection" | "commit_pair"
    std::string target;  // "af" | "cc"
    std::string test_file;
    std::string test_qualified;
    std::string test_source;   // UT0
    LineSpan test_span;
    std::string fm_file;
    std::string fm_qualified;
    std::string fm0_source;
    LineSpan fm0_span;
    std::string fm1_source;
    std::string change_label;
    int rounds_used = 0;
    bool validated = false;
    double jaccard = 0.0;
    double llm_prob = 0.0;
    std::string commit_old;
    std::string commit_new;
};

std::string benchmark_case_to_json_line(const BenchmarkCase& c);
BenchmarkCase benchmark_case_from_json_line(const std::string& line);
std::vector<BenchmarkCase> load_benchmark(const fs::path& path);
void append_benchmark(const fs::path& path, const BenchmarkCase& c);

BenchmarkCase benchmark_case_from_injection(const ChangeInjection& injection);
BenchmarkCase benchmark_case_from_commit_pair(const CommitPairRecord& record);

std::shared_ptr<ChatBackend> make_backend(const Config& config);

// --- pair command ---------------------------------------------------------

struct PairOutcome {
    std::string test_id;
    std::string focal_qualified_name;
    double jaccard = 0.0;
    double llm_prob = 0.0;
    bool validated = false;
};

std::vector<PairOutcome> pair_project(const fs::path& project_root,
                                      const Config& config,
                                      ChatBackend& backend);

std::string pairs_to_json(const std::vector<PairOutcome>& pairs);

// --- repair command -------------------------------------------------------

struct RepairCaseResult {
    std::optional<RepairSession> session;  // empty when no failure reproduced
    std::string skipped_reason;
};

// Runs the validator, collects slices, drives the loop, re-verifies
// stability on acceptance, and persists the session.
RepairCaseResult run_repair_case(const BenchmarkCase& bench,
                                 const fs::path& project_root,
                                 RepairMode mode,
                                 PromptSetting setting,
                                 const Config& config,
                                 ChatBackend& backend);

struct BatchResult {
    int sessions = 0;
    int skipped = 0;
    int aborted_replay_miss = 0;
    int aborted_other = 0;
};

BatchResult run_repair_batch(const std::vector<BenchmarkCase>& cases,
                             const fs::path& project_root,
                             RepairMode mode,
                             PromptSetting setting,
                             const Config& config,
                             ChatBackend& backend);

// --- mining drivers -------------------------------------------------------

struct SyntheticMineResult {
    std::vector<BenchmarkCase> emitted;
    int failed = 0;
};

SyntheticMineResult mine_synthetic(const fs::path& project_root,
                                   InjectionTarget target,
                                   const std::vector<PairOutcome>& pairs,
                                   const Config& config,
                                   ChatBackend& backend,
                                   const fs::path& out_path,
                                   size_t max_cases = 0);

std::vector<BenchmarkCase> mine_git(const fs::path& repo,
                                    const PairLocation& location,
                                    const Config& config,
                                    const fs::path& out_path,
                                    int max_depth = 200,
                                    const std::string& head_rev = "HEAD");

} // namespace testmend
