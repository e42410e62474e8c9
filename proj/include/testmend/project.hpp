#pragma once

#include "testmend/pysrc.hpp"
#include "testmend/runner.hpp"

#include <filesystem>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace testmend {

namespace fs = std::filesystem;

class SpanDrift : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MethodIndex {
    // file (relative path, '/'-separated) -> records ordered by span start
    std::map<std::string, std::vector<MethodRecord>> by_file;

    const MethodRecord* find(const std::string& file, const std::string& qualified_name) const;
    const MethodRecord* find_qualified(const std::string& qualified_name) const;

    // Project methods whose final name segment equals `name`; tests excluded.
    std::vector<const MethodRecord*> resolve_name(const std::string& name) const;

    std::vector<const MethodRecord*> all_tests() const;
    size_t method_count() const;
};

struct ProjectSnapshot {
    fs::path root;
    RunnerConfig runner;
    std::string sandbox_id;
    MethodIndex index;
};

// Scans every *.py under root. Files that fail to parse are skipped and
// reported on stderr.
MethodIndex index_project(const fs::path& root, const std::string& test_file_glob = "");

// Copies the project into a fresh directory under sandbox_base and indexes it.
ProjectSnapshot materialize_sandbox(const fs::path& original_root,
                                    const RunnerConfig& runner,
                                    const fs::path& sandbox_base);

// Replaces the target method's span with new_source (re-indented to the
// target's column) inside the sandbox, then re-extracts the file's records.
// Throws ParseError when new_source is not a single function definition and
// SpanDrift when the file no longer matches the record.
ProjectSnapshot replace_method(ProjectSnapshot snapshot,
                               const MethodRecord& target,
                               const std::string& new_source);

// Renames the test to "test_" + 8 random lowercase letters and substitutes
// every occurrence of the old name in the test's file.
TestRecord anonymize_test_name(ProjectSnapshot& snapshot,
                               const TestRecord& test,
                               std::mt19937_64& rng);

// Fills CallSite::resolved against the snapshot's index.
void resolve_call_sites(std::vector<CallSite>& sites, const MethodIndex& index);

std::string reindent_to(const std::string& source, int target_indent);

} // namespace testmend
