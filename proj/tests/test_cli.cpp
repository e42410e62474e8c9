#include <doctest.h>

#include "testmend/driver.hpp"
#include "testmend/report.hpp"
#include "testmend/subprocess.hpp"
#include "testmend/util.hpp"

#include "support/fixtures.hpp"
#include "support/git_fixture.hpp"

#include <nlohmann/json.hpp>

using namespace testmend;
using testing::TempDir;

namespace {

fs::path cli_path() {
#ifdef TESTMEND_CLI_PATH
    return fs::path(TESTMEND_CLI_PATH);
#else
    return "testmend";
#endif
}

CommandResult run_cli(const std::string& args, const fs::path& cwd) {
    return run_command("'" + cli_path().string() + "' " + args, cwd, 300.0);
}

// One scripted AF case reused across the CLI checks.
const char* kEnterpriseFm1 =
    "def enterprise(self, account_id):\n"
    "    if account_id == \"entUB\":\n"
    "        return {\"id\": \"invalid_id\", \"kind\": \"enterprise\"}\n"
    "    return {\"id\": account_id, \"kind\": \"enterprise\"}";

const char* kEnterpriseRepair =
    "def test_enterprise():\n"
    "    api = Api(\"key\")\n"
    "    enterprise = api.enterprise(\"entUB\")\n"
    "    assert enterprise[\"id\"] == \"invalid_id\"\n"
    "    other = api.enterprise(\"entA\")\n"
    "    assert other[\"id\"] == \"entA\"";

BenchmarkCase enterprise_case() {
    MethodIndex index = index_project(testing::miniproj_dir());
    const MethodRecord* test = index.find("tests/test_api.py", "test_enterprise");
    const MethodRecord* focal = index.find_qualified("Api.enterprise");
    BenchmarkCase bench;
    bench.kind = "injection";
    bench.target = "af";
    bench.test_file = test->file;
    bench.test_qualified = test->qualified_name;
    bench.test_source = test->source;
    bench.test_span = test->span;
    bench.fm_file = focal->file;
    bench.fm_qualified = focal->qualified_name;
    bench.fm0_source = focal->source;
    bench.fm0_span = focal->span;
    bench.fm1_source = kEnterpriseFm1;
    bench.change_label = "scripted";
    bench.validated = true;
    bench.jaccard = 1.0;
    bench.llm_prob = 0.9;
    return bench;
}

} // namespace

TEST_CASE("cli: unknown setting flag exits 1 with usage text") {
    TempDir tmp("cli-usage");
    auto result = run_cli("repair --project x --pairs y --mode af --setting bogus", tmp.path);
    CHECK(result.exit_code == 1);
    CHECK(contains(result.output, "--setting"));
}

TEST_CASE("cli: missing subcommand exits 1") {
    TempDir tmp("cli-none");
    auto result = run_cli("", tmp.path);
    CHECK(result.exit_code == 1);
}

TEST_CASE("cli: replay miss aborts with exit 3 and names the key") {
    TempDir tmp("cli-miss");
    Config config = testing::fixture_config(tmp.path);
    config.llm.backend = "replay";
    config.llm.replay_store = tmp.path / "empty_replay.json";  // no entries
    write_file(tmp.path / "config.json", config.to_json_text());
    append_benchmark(tmp.path / "bench.jsonl", enterprise_case());

    auto result = run_cli("--config '" + (tmp.path / "config.json").string() +
                              "' repair --project '" + testing::miniproj_dir().string() +
                              "' --pairs '" + (tmp.path / "bench.jsonl").string() +
                              "' --mode af --setting nc",
                          tmp.path);
    CHECK(result.exit_code == 3);
    CHECK(contains(result.output, "missing key"));
}

TEST_CASE("cli: recorded store replays to session records, exit 0, report works") {
    TempDir tmp("cli-replay");
    Config config = testing::fixture_config(tmp.path);
    config.stability_runs = 2;
    config.llm.replay_store = tmp.path / "replay.json";

    // Record the scripted session once through the library.
    {
        auto store = std::make_shared<ReplayStore>(config.llm.replay_store);
        testing::ScriptedBackend scripted;
        scripted.script("def test_enterprise(",
                        {testing::wrap_repair(kEnterpriseRepair, "expected value change")});
        auto inner = std::make_shared<testing::ScriptedBackend>(scripted);
        RecordingBackend recorder(inner, store);
        Config record_config = config;
        record_config.paths.session_store = tmp.path / "record_sessions.jsonl";
        auto result = run_repair_case(enterprise_case(), testing::miniproj_dir(),
                                      RepairMode::AssertionFailure, PromptSetting::NoSlice,
                                      record_config, recorder);
        REQUIRE(result.session.has_value());
        REQUIRE(result.session->final_status.kind == FinalStatus::Kind::RepairedAtRound);
    }

    // Now the CLI, offline, against the recorded store.
    config.llm.backend = "replay";
    config.paths.session_store = tmp.path / "sessions.jsonl";
    write_file(tmp.path / "config.json", config.to_json_text());
    append_benchmark(tmp.path / "bench.jsonl", enterprise_case());

    auto repair = run_cli("--config '" + (tmp.path / "config.json").string() +
                              "' repair --project '" + testing::miniproj_dir().string() +
                              "' --pairs '" + (tmp.path / "bench.jsonl").string() +
                              "' --mode af --setting nc",
                          tmp.path);
    CHECK(repair.exit_code == 0);
    auto rows = load_sessions(config.paths.session_store);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].status_kind == "repaired");
    CHECK(rows[0].repaired_round == 0);

    auto report = run_cli("report --sessions '" + config.paths.session_store.string() +
                              "' --format csv --out '" + (tmp.path / "out").string() + "'",
                          tmp.path);
    CHECK(report.exit_code == 0);
    CHECK(contains(report.output, "setting,mode,sessions"));
    CHECK(fs::exists(tmp.path / "out" / "report.csv"));
    CHECK(fs::exists(tmp.path / "out" / "sessions.csv"));

    auto md = run_cli("report --sessions '" + config.paths.session_store.string() +
                          "' --format md --out '" + (tmp.path / "out").string() + "'",
                      tmp.path);
    CHECK(md.exit_code == 0);
    CHECK(fs::exists(tmp.path / "out" / "report.md"));
    // Sessions are not mutated by reporting.
    CHECK(load_sessions(config.paths.session_store).size() == 1);
}

TEST_CASE("cli: pair command writes pairs.json for the fixture project") {
    TempDir tmp("cli-pair");
    Config config = testing::fixture_config(tmp.path);
    config.llm.replay_store = tmp.path / "replay.json";

    // Record pairing replies for the five fixture tests.
    {
        auto store = std::make_shared<ReplayStore>(config.llm.replay_store);
        testing::ScriptedBackend scripted;
        scripted.script("Test name: test_bases", {"Api.bases:0.95"});
        scripted.script("Test name: test_batch_delete", {"Api.batch_delete:0.92, delete:0.05"});
        scripted.script("Test name: test_enterprise", {"Api.enterprise:0.9"});
        scripted.script("Test name: test_build_url", {"Api.build_url:0.88"});
        scripted.script("Test name: test_validate_flag", {"validate_flag:0.97"});
        auto inner = std::make_shared<testing::ScriptedBackend>(scripted);
        RecordingBackend recorder(inner, store);
        pair_project(testing::miniproj_dir(), config, recorder);
    }

    config.llm.backend = "replay";
    write_file(tmp.path / "config.json", config.to_json_text());
    auto result = run_cli("--config '" + (tmp.path / "config.json").string() +
                              "' pair --project '" + testing::miniproj_dir().string() +
                              "' --out '" + (tmp.path / "pairs.json").string() + "'",
                          tmp.path);
    CHECK(result.exit_code == 0);
    REQUIRE(fs::exists(tmp.path / "pairs.json"));
    auto doc = nlohmann::json::parse(read_file(tmp.path / "pairs.json"));
    CHECK(doc.size() == 5);
    int validated = 0;
    for (const auto& entry : doc) {
        CHECK(entry.contains("test_id"));
        CHECK(entry.contains("focal_qualified_name"));
        CHECK(entry.contains("jaccard"));
        CHECK(entry.contains("llm_prob"));
        CHECK(entry.contains("validated"));
        validated += entry["validated"].get<bool>();
    }
    // dead code pairs don't exist here: all five fixtures call their focal.
    CHECK(validated == 5);
}

TEST_CASE("cli: environment failures exit 2") {
    TempDir tmp("cli-env");
    // Config that fails validation (missing placeholders in the template).
    write_file(tmp.path / "bad.json",
               R"({"runner": {"command_template": "python -m pytest"}})");
    auto bad_config = run_cli("--config '" + (tmp.path / "bad.json").string() +
                                  "' report --sessions nowhere.jsonl",
                              tmp.path);
    CHECK(bad_config.exit_code == 2);

    // Missing session store.
    auto missing = run_cli("report --sessions '" + (tmp.path / "absent.jsonl").string() + "'",
                           tmp.path);
    CHECK(missing.exit_code == 2);
}

TEST_CASE("cli: mine-git emits classified change pairs from the history fixture") {
    TempDir tmp("cli-git");
    Config config = testing::fixture_config(tmp.path);
    write_file(tmp.path / "config.json", config.to_json_text());
    const fs::path repo = tmp.path / "history";
    testing::build_history_fixture(repo);

    auto result = run_cli("--config '" + (tmp.path / "config.json").string() +
                              "' mine-git --repo '" + repo.string() +
                              "' --fm-file pkg/calc.py --fm add"
                              " --ut-file tests/test_calc.py --ut test_add --out '" +
                              (tmp.path / "bench.jsonl").string() + "'",
                          tmp.path);
    CHECK(result.exit_code == 0);
    CHECK(contains(result.output, "1 af, 1 cc"));
    auto cases = load_benchmark(tmp.path / "bench.jsonl");
    CHECK(cases.size() == 3);
    int validated = 0;
    for (const auto& c : cases) {
        CHECK(c.kind == "commit_pair");
        CHECK_FALSE(c.commit_old.empty());
        CHECK_FALSE(c.fm1_source.empty());
        validated += c.validated;
    }
    CHECK(validated == 2);
}

TEST_CASE("cli: mine-synthetic injects a validated AF case offline") {
    TempDir tmp("cli-synth");
    Config config = testing::fixture_config(tmp.path);
    config.llm.replay_store = tmp.path / "replay.json";

    // Record the injection reply, then replay through the CLI.
    const std::string fm1 =
        "def enterprise(self, account_id):\n"
        "    if account_id == \"entUB\":\n"
        "        return {\"id\": \"invalid_id\", \"kind\": \"enterprise\"}\n"
        "    return {\"id\": account_id, \"kind\": \"enterprise\"}";
    {
        auto store = std::make_shared<ReplayStore>(config.llm.replay_store);
        testing::ScriptedBackend scripted;
        scripted.script("<focal_method>",
                        {"<root><changed_focal_method>\n" + fm1 +
                         "\n</changed_focal_method></root>"});
        auto inner = std::make_shared<testing::ScriptedBackend>(scripted);
        RecordingBackend recorder(inner, store);
        std::vector<PairOutcome> pairs = {{"tests/test_api.py::test_enterprise",
                                           "Api.enterprise", 1.0, 0.9, true}};
        mine_synthetic(testing::miniproj_dir(), InjectionTarget::AssertionFailure, pairs,
                       config, recorder, tmp.path / "warmup.jsonl", 1);
    }

    config.llm.backend = "replay";
    write_file(tmp.path / "config.json", config.to_json_text());
    write_file(tmp.path / "pairs.json",
               R"([{"test_id": "tests/test_api.py::test_enterprise",
                    "focal_qualified_name": "Api.enterprise",
                    "jaccard": 1.0, "llm_prob": 0.9, "validated": true}])");
    auto result = run_cli("--config '" + (tmp.path / "config.json").string() +
                              "' mine-synthetic --project '" + testing::miniproj_dir().string() +
                              "' --pairs '" + (tmp.path / "pairs.json").string() +
                              "' --target af --out '" + (tmp.path / "bench.jsonl").string() +
                              "' --max 1",
                          tmp.path);
    CHECK(result.exit_code == 0);
    auto cases = load_benchmark(tmp.path / "bench.jsonl");
    REQUIRE(cases.size() == 1);
    CHECK(cases[0].kind == "injection");
    CHECK(cases[0].target == "af");
    CHECK(cases[0].validated);
    CHECK(cases[0].rounds_used == 1);
    CHECK(contains(cases[0].fm1_source, "invalid_id"));
}
