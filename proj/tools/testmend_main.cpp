#include "testmend/config.hpp"
#include "testmend/driver.hpp"
#include "testmend/report.hpp"
#include "testmend/util.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <iostream>

using namespace testmend;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitEnvironment = 2;
constexpr int kExitReplayMiss = 3;

Config load_config(const std::string& config_path) {
    if (config_path.empty()) {
        return Config{};
    }
    return Config::load(config_path);
}

int cmd_pair(const Config& config, const std::string& project, const std::string& out) {
    auto backend = make_backend(config);
    std::vector<PairOutcome> pairs = pair_project(project, config, *backend);
    write_file(out, pairs_to_json(pairs));
    std::cout << "paired " << pairs.size() << " tests -> " << out << "\n";
    int validated = 0;
    for (const auto& pair : pairs) {
        validated += pair.validated;
    }
    std::cout << "dynamically validated: " << validated << "/" << pairs.size() << "\n";
    return kExitOk;
}

int cmd_repair(const Config& config, const std::string& project, const std::string& pairs_file,
               const std::string& mode_name, const std::string& setting_name) {
    const auto mode = repair_mode_from_string(mode_name);
    const auto setting = prompt_setting_from_string(setting_name);
    if (!mode || !setting) {
        std::cerr << "unknown mode/setting\n";
        return kExitUsage;
    }
    auto backend = make_backend(config);
    std::vector<BenchmarkCase> cases = load_benchmark(pairs_file);
    BatchResult result =
        run_repair_batch(cases, project, *mode, *setting, config, *backend);
    std::cout << "sessions: " << result.sessions << " skipped: " << result.skipped
              << " replay-misses: " << result.aborted_replay_miss << "\n";
    std::cout << "session store: " << config.paths.session_store.string() << "\n";
    if (result.aborted_replay_miss > 0) {
        return kExitReplayMiss;
    }
    if (result.aborted_other > 0) {
        return kExitEnvironment;
    }
    return kExitOk;
}

int cmd_mine_synthetic(const Config& config, const std::string& project,
                       const std::string& pairs_file, const std::string& target_name,
                       const std::string& out, size_t max_cases) {
    const InjectionTarget target = target_name == "cc" ? InjectionTarget::ReducedCoverage
                                                       : InjectionTarget::AssertionFailure;
    auto backend = make_backend(config);

    // pairs.json from the pair subcommand.
    std::vector<PairOutcome> pairs;
    auto doc = nlohmann::json::parse(read_file(pairs_file));
    for (const auto& entry : doc) {
        PairOutcome pair;
        pair.test_id = entry.value("test_id", "");
        pair.focal_qualified_name = entry.value("focal_qualified_name", "");
        pair.jaccard = entry.value("jaccard", 0.0);
        pair.llm_prob = entry.value("llm_prob", 0.0);
        pair.validated = entry.value("validated", false);
        pairs.push_back(std::move(pair));
    }

    SyntheticMineResult result =
        mine_synthetic(project, target, pairs, config, *backend, out, max_cases);
    std::cout << "emitted " << result.emitted.size() << " cases (" << result.failed
              << " failed) -> " << out << "\n";
    return kExitOk;
}

int cmd_mine_git(const Config& config, const std::string& repo, const PairLocation& location,
                 const std::string& head, int depth, const std::string& out) {
    std::vector<BenchmarkCase> cases = mine_git(repo, location, config, out, depth, head);
    int af = 0;
    int cc = 0;
    for (const auto& c : cases) {
        af += c.validated && c.target == "af";
        cc += c.validated && c.target == "cc";
    }
    std::cout << "mined " << cases.size() << " change pairs (" << af << " af, " << cc
              << " cc) -> " << out << "\n";
    return kExitOk;
}

int cmd_report(const std::string& sessions_file, const std::string& format,
               const std::string& out_dir) {
    std::vector<SessionRow> rows = load_sessions(sessions_file);
    MetricsReport metrics = compute_metrics(rows);
    const fs::path out(out_dir);
    fs::create_directories(out);
    write_file(out / "sessions.csv", emit_sessions_csv(rows));
    if (format == "md") {
        const std::string md = emit_markdown(metrics);
        write_file(out / "report.md", md);
        std::cout << md;
    } else {
        const std::string csv = emit_csv(metrics);
        write_file(out / "report.csv", csv);
        std::cout << csv;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"testmend: change-aware unit test repair"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON config file");

    std::string project;
    std::string out;
    std::string pairs_file;
    std::string mode_name;
    std::string setting_name;
    std::string target_name = "af";
    std::string repo;
    std::string head = "HEAD";
    std::string sessions_file;
    std::string format = "csv";
    PairLocation location;
    int depth = 200;
    size_t max_cases = 0;

    CLI::App* pair_cmd = app.add_subcommand("pair", "identify focal methods for tests");
    pair_cmd->add_option("--project", project, "project root")->required();
    pair_cmd->add_option("--out", out, "output pairs.json")->default_val("pairs.json");

    CLI::App* repair_cmd = app.add_subcommand("repair", "run repair sessions");
    repair_cmd->add_option("--project", project, "project root")->required();
    repair_cmd->add_option("--pairs", pairs_file, "benchmark.jsonl of change cases")->required();
    repair_cmd->add_option("--mode", mode_name, "af|cc")
        ->required()
        ->check(CLI::IsMember({"af", "cc"}));
    repair_cmd->add_option("--setting", setting_name, "baseline|nc|s|d|sd")
        ->required()
        ->check(CLI::IsMember({"baseline", "nc", "s", "d", "sd"}));

    CLI::App* synth_cmd = app.add_subcommand("mine-synthetic", "inject focal-method changes");
    synth_cmd->add_option("--project", project, "project root")->required();
    synth_cmd->add_option("--pairs", pairs_file, "pairs.json from the pair step")->required();
    synth_cmd->add_option("--target", target_name, "af|cc")
        ->required()
        ->check(CLI::IsMember({"af", "cc"}));
    synth_cmd->add_option("--out", out, "benchmark.jsonl")->default_val("benchmark.jsonl");
    synth_cmd->add_option("--max", max_cases, "cap emitted cases");

    CLI::App* git_cmd = app.add_subcommand("mine-git", "mine change pairs from git history");
    git_cmd->add_option("--repo", repo, "git repository")->required();
    git_cmd->add_option("--fm-file", location.fm_file, "focal file at head")->required();
    git_cmd->add_option("--fm", location.fm_qualified, "focal qualified name")->required();
    git_cmd->add_option("--ut-file", location.ut_file, "test file at head")->required();
    git_cmd->add_option("--ut", location.ut_qualified, "test qualified name")->required();
    git_cmd->add_option("--head", head, "anchor revision")->default_val("HEAD");
    git_cmd->add_option("--depth", depth, "history depth cap");
    git_cmd->add_option("--out", out, "benchmark.jsonl")->default_val("benchmark.jsonl");

    CLI::App* report_cmd = app.add_subcommand("report", "compute metrics from sessions");
    report_cmd->add_option("--sessions", sessions_file, "sessions.jsonl store")->required();
    report_cmd->add_option("--format", format, "csv|md")->check(CLI::IsMember({"csv", "md"}));
    report_cmd->add_option("--out", out, "output directory")->default_val(".");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        const Config config = load_config(config_path);
        if (pair_cmd->parsed()) {
            return cmd_pair(config, project, out);
        }
        if (repair_cmd->parsed()) {
            return cmd_repair(config, project, pairs_file, mode_name, setting_name);
        }
        if (synth_cmd->parsed()) {
            return cmd_mine_synthetic(config, project, pairs_file, target_name, out, max_cases);
        }
        if (git_cmd->parsed()) {
            return cmd_mine_git(config, repo, location, head, depth, out);
        }
        if (report_cmd->parsed()) {
            return cmd_report(sessions_file, format, out);
        }
    } catch (const ReplayMiss& e) {
        std::cerr << "replay miss: " << e.key() << "\n";
        return kExitReplayMiss;
    } catch (const RunnerFailure& e) {
        std::cerr << "runner failure: " << e.what() << "\n";
        return kExitEnvironment;
    } catch (const ReportMissing& e) {
        std::cerr << "report missing: " << e.what() << "\n";
        return kExitEnvironment;
    } catch (const GitError& e) {
        std::cerr << "git error: " << e.what() << "\n";
        return kExitEnvironment;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitEnvironment;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEnvironment;
    }
    return kExitUsage;
}
