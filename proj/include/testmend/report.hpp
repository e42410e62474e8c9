#pragma once

#include "testmend/repair.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace testmend {

// A session row as parsed back from the JSON-lines store.
struct SessionRow {
    std::string session_id;
    std::string test_id;
    std::string setting;
    std::string mode;
    int budget = 0;
    int attempts = 0;
    std::string status_kind;  // repaired | budget_exhausted | aborted
    int repaired_round = -1;
    double baseline_ratio = 1.0;
    double best_ratio = 0.0;
    double wall_time_s = 0.0;
    int gateway_calls = 0;
};

std::vector<SessionRow> load_sessions(const std::filesystem::path& store);
SessionRow session_row_from_json_line(const std::string& line);

// Entry k = sessions repaired at round j <= k; length budget+1.
std::vector<int> compute_pass_at_k(const std::vector<SessionRow>& sessions);

struct CoverageStats {
    int sessions = 0;
    double median = 0.0;
    double mean = 0.0;
    int count_full = 0;
    bool has_data = false;
};

CoverageStats compute_coverage_stats(const std::vector<SessionRow>& sessions);

struct RuntimeStats {
    double mean = 0.0;
    double median = 0.0;
};

RuntimeStats compute_runtime_stats(const std::vector<SessionRow>& sessions);

// Round at which each session settled: repair round (AF), last improving
// round (approximated by repair round for accepted CC sessions), or the
// budget for exhausted sessions.
std::map<int, int> compute_cot_histogram(const std::vector<SessionRow>& sessions);

struct MetricsReport {
    struct Group {
        std::string setting;
        std::string mode;
        std::vector<SessionRow> sessions;
        std::vector<int> cumulative;  // pass@k
        CoverageStats coverage;
        RuntimeStats runtime;
        std::map<int, int> cot;
        double repair_rate = 0.0;
    };
    std::vector<Group> groups;  // ordered by (setting, mode)
};

MetricsReport compute_metrics(const std::vector<SessionRow>& sessions);

std::string emit_csv(const MetricsReport& metrics);
std::string emit_markdown(const MetricsReport& metrics);
std::string emit_sessions_csv(const std::vector<SessionRow>& sessions);

} // namespace testmend
