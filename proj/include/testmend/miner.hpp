#pragma once

#include "testmend/gateway.hpp"
#include "testmend/pairing.hpp"
#include "testmend/project.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace testmend {

class GitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InsufficientRecords : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class AllRoundsFailed : public std::runtime_error {
public:
    AllRoundsFailed(const std::string& message, int rounds_used)
        : std::runtime_error(message), rounds_used_(rounds_used) {}
    int rounds_used() const { return rounds_used_; }

private:
    int rounds_used_;
};

struct ChangeTypeEntry {
    std::string label;
    std::string instruction;
};

struct ChangeTypeCatalog {
    std::vector<ChangeTypeEntry> entries;

    static ChangeTypeCatalog builtin();
    static ChangeTypeCatalog load(const fs::path& path);
    const ChangeTypeEntry& by_label(const std::string& label) const;
};

enum class InjectionTarget { AssertionFailure, ReducedCoverage };

const char* to_string(InjectionTarget target);

struct ChangeInjection {
    FmUtPair pair;
    std::string fm1_source;
    std::string change_label;
    InjectionTarget target = InjectionTarget::AssertionFailure;
    int rounds_used = 0;
    bool validated = false;
};

// LLM-guided focal change with a bounded feedback loop (3 rounds, early stop
// on an identical compilation error in consecutive rounds).
ChangeInjection inject_change(const FmUtPair& pair,
                              InjectionTarget target,
                              const ChangeTypeEntry& entry,
                              ChatBackend& backend,
                              const GenParams& params,
                              const fs::path& pristine_root,
                              const RunnerConfig& runner,
                              const fs::path& sandbox_base,
                              double fm0_baseline_ratio,
                              int max_rounds = 3);

std::string injection_prompt(const FmUtPair& pair,
                             InjectionTarget target,
                             const ChangeTypeEntry& entry,
                             const std::string& focal_file_source,
                             const std::string& test_file_source);

// Structural source comparison: comments, blank lines, docstrings and
// whitespace do not count as changes.
bool ast_equal(const std::string& a, const std::string& b);
std::string normalize_structure(const std::string& source);

struct CommitPairRecord {
    std::string commit_old;
    std::string commit_new;
    MethodRecord fm_old;
    MethodRecord fm_new;
    MethodRecord ut_old;
    MethodRecord ut_new;
    std::string classification = "NoSignal";  // AssertionFailure | ReducedCoverage | NoSignal
};

struct PairLocation {
    std::string fm_file;
    std::string fm_qualified;
    std::string ut_file;
    std::string ut_qualified;
};

std::vector<CommitPairRecord> mine_git_history(const fs::path& repo,
                                               const PairLocation& pair,
                                               int max_depth = 200,
                                               const std::string& head_rev = "HEAD");

// Runs the Step 3 gate and the head transplant, filling classification.
std::string classify_transplant(CommitPairRecord& record,
                                const fs::path& repo,
                                const RunnerConfig& runner,
                                const fs::path& sandbox_base);

// Uniform per-class sampling without replacement, deterministic under seed.
std::vector<CommitPairRecord> sample_cases(const std::vector<CommitPairRecord>& records,
                                           size_t n_af,
                                           size_t n_cc,
                                           uint64_t seed);

std::string run_git(const fs::path& repo, const std::string& args);

} // namespace testmend
