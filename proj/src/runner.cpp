#include "testmend/runner.hpp"

#include "testmend/project.hpp"
#include "testmend/subprocess.hpp"
#include "testmend/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace testmend {

using json = nlohmann::json;

namespace {

constexpr double kRegressionEpsilon = 1e-9;

const char* kCollectionMarkers[] = {
    "ERROR collecting",
    "ImportError while importing",
    "ModuleNotFoundError",
    "found no collectors",
    "ERROR: not found",
    "errors during collection",
};

bool has_assertion_block(const std::vector<std::string>& lines) {
    bool pointer_seen = false;
    for (const std::string& line : lines) {
        const std::string s = lstrip(line);
        if (s.rfind('>', 0) == 0) {
            pointer_seen = true;
            continue;
        }
        if (pointer_seen && s.size() > 1 && s[0] == 'E' && s[1] == ' ') {
            if (contains(to_lower(s), "assert")) {
                return true;
            }
            continue;
        }
        if (!s.empty()) {
            pointer_seen = false;
        }
    }
    return false;
}

} // namespace

void RunnerConfig::validate() const {
    if (!contains(command_template, "{test_id}") || !contains(command_template, "{report_path}")) {
        throw RunnerFailure("command template must contain {test_id} and {report_path}");
    }
    if (timeout_s <= 0) {
        throw RunnerFailure("runner timeout must be positive");
    }
}

const char* to_string(OutcomeKind kind) {
    switch (kind) {
    case OutcomeKind::Pass: return "Pass";
    case OutcomeKind::AssertionFailure: return "AssertionFailure";
    case OutcomeKind::RuntimeError: return "RuntimeError";
    case OutcomeKind::CollectionError: return "CollectionError";
    case OutcomeKind::Timeout: return "Timeout";
    }
    return "?";
}

const FileCoverage* CoverageReport::find(const std::string& file) const {
    auto it = files.find(file);
    if (it != files.end()) {
        return &it->second;
    }
    std::string alt = file;
    if (alt.rfind("./", 0) == 0) {
        alt = alt.substr(2);
        it = files.find(alt);
        if (it != files.end()) {
            return &it->second;
        }
    }
    return nullptr;
}

OutcomeKind classify_outcome(int exit_status, const std::string& raw_log) {
    if (exit_status == 0) {
        return OutcomeKind::Pass;
    }
    if (contains(raw_log, "AssertionError")) {
        return OutcomeKind::AssertionFailure;
    }
    for (const char* marker : kCollectionMarkers) {
        if (contains(raw_log, marker)) {
            return OutcomeKind::CollectionError;
        }
    }
    if (has_assertion_block(split_lines(raw_log))) {
        return OutcomeKind::AssertionFailure;
    }
    return OutcomeKind::RuntimeError;
}

FailureFeedback extract_failure_feedback(const std::string& raw_log) {
    const std::vector<std::string> lines = split_lines(raw_log);
    FailureFeedback feedback;
    for (const std::string& line : lines) {
        const std::string s = lstrip(line);
        if (s.rfind('>', 0) == 0 || (s.size() > 1 && s[0] == 'E' && s[1] == ' ')) {
            feedback.lines.push_back(line);
        }
    }
    if (feedback.lines.empty()) {
        // Log format drift: fall back to the tail of the log.
        feedback.fallback = true;
        const size_t take = std::min<size_t>(lines.size(), 30);
        feedback.lines.assign(lines.end() - static_cast<long>(take), lines.end());
    }
    return feedback;
}

CoverageReport parse_coverage_json(const std::string& json_text) {
    json doc = json::parse(json_text);
    CoverageReport report;
    if (!doc.contains("files") || !doc["files"].is_object()) {
        throw ReportMissing("coverage report has no files map");
    }
    for (auto& [path, entry] : doc["files"].items()) {
        FileCoverage fc;
        for (const auto& v : entry.value("executed_lines", json::array())) {
            fc.covered_lines.insert(v.get<int>());
        }
        fc.executable_lines = fc.covered_lines;
        for (const auto& v : entry.value("missing_lines", json::array())) {
            fc.executable_lines.insert(v.get<int>());
        }
        // covered ⊆ executable holds by construction; keep the guard anyway.
        for (int line : fc.covered_lines) {
            if (fc.executable_lines.count(line) == 0) {
                throw ReportMissing("covered line missing from executable set");
            }
        }
        std::string key = path;
        std::replace(key.begin(), key.end(), '\\', '/');
        report.files[key] = std::move(fc);
    }
    return report;
}

std::pair<TestOutcome, CoverageReport> run_test_isolated(const ProjectSnapshot& snapshot,
                                                         const std::string& test_id) {
    snapshot.runner.validate();
    const fs::path report_dir = snapshot.root / ".testmend";
    fs::create_directories(report_dir);
    const fs::path report_path = report_dir / "coverage.json";
    std::error_code ec;
    fs::remove(report_path, ec);

    std::string command = snapshot.runner.command_template;
    command = replace_all(command, "{test_id}", "'" + test_id + "'");
    command = replace_all(command, "{report_path}", "'" + report_path.string() + "'");

    CommandResult result = run_command(command, snapshot.root, snapshot.runner.timeout_s);

    TestOutcome outcome;
    outcome.raw_log = result.output;
    outcome.duration_s = result.duration_s;
    if (result.timed_out) {
        outcome.kind = OutcomeKind::Timeout;
        return {std::move(outcome), CoverageReport{}};
    }
    outcome.kind = classify_outcome(result.exit_code, result.output);
    if (outcome.kind == OutcomeKind::AssertionFailure) {
        outcome.feedback = extract_failure_feedback(result.output);
    }

    if (!fs::exists(report_path)) {
        throw ReportMissing("runner produced no coverage report at " + report_path.string() +
                            " (exit " + std::to_string(result.exit_code) + ")");
    }
    CoverageReport report = parse_coverage_json(read_file(report_path));
    return {std::move(outcome), std::move(report)};
}

MethodCoverage method_coverage(const CoverageReport& report, const MethodRecord& method) {
    MethodCoverage cov;
    cov.method = method.qualified_name;
    const FileCoverage* fc = report.find(method.file);
    if (fc == nullptr) {
        cov.ratio = 1.0;  // file absent: nothing executable inside the span
        return cov;
    }
    const std::vector<std::string> source_lines = split_lines(method.source);
    for (int line = method.span.start; line <= method.span.end; ++line) {
        const bool executable = fc->executable_lines.count(line) > 0;
        if (!executable) {
            continue;
        }
        ++cov.executable;
        if (fc->covered_lines.count(line) > 0) {
            ++cov.covered;
        } else {
            const size_t idx = static_cast<size_t>(line - method.span.start);
            cov.uncovered.emplace_back(line, idx < source_lines.size() ? source_lines[idx] : "");
        }
    }
    cov.ratio = cov.executable > 0 ? static_cast<double>(cov.covered) / cov.executable : 1.0;
    return cov;
}

bool coverage_regressed(const MethodCoverage& before, const MethodCoverage& after) {
    return after.ratio < before.ratio - kRegressionEpsilon;
}

bool confirm_stability(const ProjectSnapshot& snapshot, const std::string& test_id, int n) {
    if (n < 1) {
        throw RunnerFailure("stability run count must be >= 1");
    }
    for (int i = 0; i < n; ++i) {
        auto [outcome, report] = run_test_isolated(snapshot, test_id);
        if (outcome.kind != OutcomeKind::Pass) {
            return false;
        }
    }
    return true;
}

std::string test_node_id(const MethodRecord& test) {
    return test.file + "::" + replace_all(test.qualified_name, ".", "::");
}

} // namespace testmend
