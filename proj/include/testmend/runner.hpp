#pragma once

#include "testmend/pysrc.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace testmend {

struct ProjectSnapshot;

struct RunnerConfig {
    // Placeholders {test_id} and {report_path} are both required.
    std::string command_template =
        "python -m pytest {test_id} --cov --cov-report=json:{report_path} -q";
    std::string report_format = "coverage-json";
    double timeout_s = 300.0;
    int repeat_for_stability = 10;
    std::string test_file_glob;  // optional static test detection aid

    void validate() const;
};

enum class OutcomeKind { Pass, AssertionFailure, RuntimeError, CollectionError, Timeout };

const char* to_string(OutcomeKind kind);

struct FailureFeedback {
    std::vector<std::string> lines;
    bool fallback = false;  // true when no markers were found and the log tail was used
};

struct TestOutcome {
    OutcomeKind kind = OutcomeKind::RuntimeError;
    std::string raw_log;
    std::optional<FailureFeedback> feedback;  // present iff kind == AssertionFailure
    double duration_s = 0.0;
};

struct FileCoverage {
    std::set<int> covered_lines;
    std::set<int> executable_lines;  // covered plus missing
};

struct CoverageReport {
    std::map<std::string, FileCoverage> files;

    const FileCoverage* find(const std::string& file) const;
};

struct MethodCoverage {
    std::string method;
    int covered = 0;
    int executable = 0;
    double ratio = 1.0;  // covered/executable; 1.0 when nothing is executable
    std::vector<std::pair<int, std::string>> uncovered;  // (line, source text)
};

class ReportMissing : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RunnerFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::pair<TestOutcome, CoverageReport> run_test_isolated(const ProjectSnapshot& snapshot,
                                                         const std::string& test_id);

OutcomeKind classify_outcome(int exit_status, const std::string& raw_log);

FailureFeedback extract_failure_feedback(const std::string& raw_log);

CoverageReport parse_coverage_json(const std::string& json_text);

MethodCoverage method_coverage(const CoverageReport& report, const MethodRecord& method);

// True when coverage dropped beyond the epsilon guard.
bool coverage_regressed(const MethodCoverage& before, const MethodCoverage& after);

bool confirm_stability(const ProjectSnapshot& snapshot, const std::string& test_id, int n);

// pytest-style node id: file::Class::name.
std::string test_node_id(const MethodRecord& test);

} // namespace testmend
