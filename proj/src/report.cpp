#include "testmend/report.hpp"

#include "testmend/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace testmend {

using json = nlohmann::json;

SessionRow session_row_from_json_line(const std::string& line) {
    json doc = json::parse(line);
    SessionRow row;
    row.session_id = doc.value("session_id", "");
    row.test_id = doc["pair"].value("test_id", "");
    row.setting = doc.value("setting", "");
    row.mode = doc.value("mode", "");
    row.budget = doc.value("budget", 0);
    row.attempts = static_cast<int>(doc.value("attempts", json::array()).size());
    const json& status = doc["final_status"];
    row.status_kind = status.value("kind", "");
    row.repaired_round = status.value("round", -1);
    row.baseline_ratio = doc.value("baseline_ratio", 1.0);
    row.best_ratio = doc.value("best_ratio", 0.0);
    row.wall_time_s = doc.value("wall_time_s", 0.0);
    row.gateway_calls = doc.value("gateway_calls", 0);
    return row;
}

std::vector<SessionRow> load_sessions(const std::filesystem::path& store) {
    std::vector<SessionRow> rows;
    std::ifstream in(store);
    if (!in) {
        throw IoError("cannot open session store: " + store.string());
    }
    std::string line;
    while (std::getline(in, line)) {
        if (strip(line).empty()) {
            continue;
        }
        rows.push_back(session_row_from_json_line(line));
    }
    return rows;
}

std::vector<int> compute_pass_at_k(const std::vector<SessionRow>& sessions) {
    int budget = 0;
    for (const SessionRow& row : sessions) {
        budget = std::max(budget, row.budget);
    }
    std::vector<int> cumulative(static_cast<size_t>(budget) + 1, 0);
    for (const SessionRow& row : sessions) {
        if (row.status_kind != "repaired" || row.repaired_round < 0) {
            continue;
        }
        for (size_t k = static_cast<size_t>(row.repaired_round); k < cumulative.size(); ++k) {
            ++cumulative[k];
        }
    }
    return cumulative;
}

namespace {

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    if (n == 0) {
        return 0.0;
    }
    if (n % 2 == 1) {
        return values[n / 2];
    }
    return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

double mean_of(const std::vector<double>& values) {
    if (values.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    return sum / static_cast<double>(values.size());
}

} // namespace

CoverageStats compute_coverage_stats(const std::vector<SessionRow>& sessions) {
    CoverageStats stats;
    std::vector<double> ratios;
    for (const SessionRow& row : sessions) {
        ratios.push_back(row.best_ratio);
        if (row.best_ratio >= 1.0 - 1e-9) {
            ++stats.count_full;
        }
    }
    stats.sessions = static_cast<int>(ratios.size());
    if (ratios.empty()) {
        return stats;  // empty input: no averages to report
    }
    stats.has_data = true;
    stats.median = median_of(ratios);
    stats.mean = mean_of(ratios);
    return stats;
}

RuntimeStats compute_runtime_stats(const std::vector<SessionRow>& sessions) {
    std::vector<double> times;
    for (const SessionRow& row : sessions) {
        times.push_back(row.wall_time_s);
    }
    RuntimeStats stats;
    stats.mean = mean_of(times);
    stats.median = median_of(times);
    return stats;
}

std::map<int, int> compute_cot_histogram(const std::vector<SessionRow>& sessions) {
    std::map<int, int> histogram;
    for (const SessionRow& row : sessions) {
        const int round = row.status_kind == "repaired" && row.repaired_round >= 0
                              ? row.repaired_round
                              : row.budget;
        ++histogram[round];
    }
    return histogram;
}

MetricsReport compute_metrics(const std::vector<SessionRow>& sessions) {
    std::map<std::pair<std::string, std::string>, std::vector<SessionRow>> grouped;
    for (const SessionRow& row : sessions) {
        grouped[{row.setting, row.mode}].push_back(row);
    }
    MetricsReport report;
    for (auto& [key, rows] : grouped) {
        MetricsReport::Group group;
        group.setting = key.first;
        group.mode = key.second;
        group.sessions = rows;
        group.cumulative = compute_pass_at_k(rows);
        group.coverage = compute_coverage_stats(rows);
        group.runtime = compute_runtime_stats(rows);
        group.cot = compute_cot_histogram(rows);
        group.repair_rate = rows.empty() ? 0.0
                                         : static_cast<double>(group.cumulative.back()) /
                                               static_cast<double>(rows.size());
        report.groups.push_back(std::move(group));
    }
    return report;
}

namespace {

std::string fmt(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4) << v;
    std::string s = out.str();
    while (!s.empty() && s.back() == '0') {
        s.pop_back();
    }
    if (!s.empty() && s.back() == '.') {
        s.pop_back();
    }
    return s;
}

} // namespace

std::string emit_csv(const MetricsReport& metrics) {
    size_t max_budget = 0;
    for (const auto& group : metrics.groups) {
        max_budget = std::max(max_budget, group.cumulative.size());
    }
    std::ostringstream out;
    out << "setting,mode,sessions,repaired,repair_rate";
    for (size_t k = 0; k < max_budget; ++k) {
        out << ",pass_at_" << k;
    }
    out << ",median_ratio,mean_ratio,count_full,mean_runtime_s,median_runtime_s\n";
    for (const auto& group : metrics.groups) {
        const int repaired = group.cumulative.empty() ? 0 : group.cumulative.back();
        out << group.setting << "," << group.mode << "," << group.sessions.size() << ","
            << repaired << "," << fmt(group.repair_rate);
        for (size_t k = 0; k < max_budget; ++k) {
            out << ",";
            if (k < group.cumulative.size()) {
                out << group.cumulative[k];
            }
        }
        out << ",";
        if (group.coverage.has_data) {
            out << fmt(group.coverage.median);
        }
        out << ",";
        if (group.coverage.has_data) {
            out << fmt(group.coverage.mean);
        }
        out << "," << group.coverage.count_full << "," << fmt(group.runtime.mean) << ","
            << fmt(group.runtime.median) << "\n";
    }
    return out.str();
}

std::string emit_markdown(const MetricsReport& metrics) {
    std::ostringstream out;
    out << "| setting | mode | sessions | repaired | repair rate | median ratio | mean ratio "
           "| full | mean s | median s |\n";
    out << "|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& group : metrics.groups) {
        const int repaired = group.cumulative.empty() ? 0 : group.cumulative.back();
        out << "| " << group.setting << " | " << group.mode << " | " << group.sessions.size()
            << " | " << repaired << " | " << fmt(group.repair_rate) << " | "
            << (group.coverage.has_data ? fmt(group.coverage.median) : "-") << " | "
            << (group.coverage.has_data ? fmt(group.coverage.mean) : "-") << " | "
            << group.coverage.count_full << " | " << fmt(group.runtime.mean) << " | "
            << fmt(group.runtime.median) << " |\n";
    }
    out << "\n";
    for (const auto& group : metrics.groups) {
        out << "pass@k (" << group.setting << "/" << group.mode << "):";
        for (int v : group.cumulative) {
            out << " " << v;
        }
        out << "\n";
        out << "cot (" << group.setting << "/" << group.mode << "):";
        for (const auto& [round, count] : group.cot) {
            out << " " << round << ":" << count;
        }
        out << "\n";
    }
    return out.str();
}

std::string emit_sessions_csv(const std::vector<SessionRow>& sessions) {
    std::ostringstream out;
    out << "session_id,test_id,setting,mode,budget,attempts,status,repaired_round,"
           "baseline_ratio,best_ratio,wall_time_s,gateway_calls\n";
    for (const SessionRow& row : sessions) {
        out << row.session_id << "," << row.test_id << "," << row.setting << "," << row.mode
            << "," << row.budget << "," << row.attempts << "," << row.status_kind << ","
            << row.repaired_round << "," << fmt(row.baseline_ratio) << ","
            << fmt(row.best_ratio) << "," << fmt(row.wall_time_s) << "," << row.gateway_calls
            << "\n";
    }
    return out.str();
}

} // namespace testmend
