#include <doctest.h>

#include "testmend/driver.hpp"
#include "testmend/report.hpp"
#include "testmend/util.hpp"

#include "support/fixtures.hpp"
#include "support/git_fixture.hpp"

using namespace testmend;
using testing::TempDir;

namespace {

const char* kBasesFm1 =
    "def bases(self, *, force=False):\n"
    "    base_info = self._base_info(force=force)[\"bases\"]\n"
    "    if not force:\n"
    "        return [\n"
    "            Base(self, info[\"id\"], info[\"name\"], info[\"permission_level\"])\n"
    "            for info in base_info\n"
    "        ]\n"
    "    return [\n"
    "        Base(self, info[\"id\"], info[\"name\"], info[\"permission_level\"])\n"
    "        for info in base_info\n"
    "        if info[\"id\"] != \"appSW9R5uCNmRmfl6\"\n"
    "    ]";

const char* kBasesRepair =
    "def test_bases():\n"
    "    api = Api(\"key\")\n"
    "    base_ids = [base.id for base in api.bases()]\n"
    "    assert base_ids == [\"appLkND\", \"appSW9R5uCNmRmfl6\"]\n"
    "    reloaded = api.bases(force=True)\n"
    "    assert [base.id for base in reloaded] == [\"appLkND\"]";

const char* kValidateFlagFm1 =
    "def validate_flag(flag):\n"
    "    if flag is None:\n"
    "        raise ValueError(\"missing flag\")\n"
    "    if flag not in (\"on\", \"off\"):\n"
    "        raise KeyError(flag)";

const char* kValidateFlagPartialRepair =
    "def test_validate_flag():\n"
    "    assert validate_flag(\"on\") is None\n"
    "    with pytest.raises(ValueError):\n"
    "        validate_flag(None)";

BenchmarkCase make_case(const std::string& test_name, const std::string& fm_qualified,
                        const std::string& fm1_source, const std::string& target) {
    MethodIndex index = index_project(testing::miniproj_dir());
    BenchmarkCase bench;
    bench.kind = "injection";
    bench.target = target;
    const MethodRecord* test = index.find("tests/test_api.py", test_name);
    const MethodRecord* focal = index.find_qualified(fm_qualified);
    REQUIRE(test != nullptr);
    REQUIRE(focal != nullptr);
    bench.test_file = test->file;
    bench.test_qualified = test->qualified_name;
    bench.test_source = test->source;
    bench.test_span = test->span;
    bench.fm_file = focal->file;
    bench.fm_qualified = focal->qualified_name;
    bench.fm0_source = focal->source;
    bench.fm0_span = focal->span;
    bench.fm1_source = fm1_source;
    bench.change_label = "scripted";
    bench.validated = true;
    bench.jaccard = 1.0;
    bench.llm_prob = 0.9;
    return bench;
}

} // namespace

TEST_CASE("AF repair accepted at round 0, stability re-verified") {
    TempDir tmp("e2e-af0");
    Config config = testing::fixture_config(tmp.path);
    config.stability_runs = 2;  // acceptance uses the full 10

    testing::ScriptedBackend backend;
    backend.script("def test_bases", {testing::wrap_repair(kBasesRepair)});

    auto bench = make_case("test_bases", "Api.bases", kBasesFm1, "af");
    auto result = run_repair_case(bench, testing::miniproj_dir(),
                                  RepairMode::AssertionFailure, PromptSetting::DynamicSlice,
                                  config, backend);
    REQUIRE(result.session.has_value());
    const RepairSession& session = *result.session;
    CHECK(session.final_status.kind == FinalStatus::Kind::RepairedAtRound);
    CHECK(session.final_status.round == 0);
    CHECK(session.attempts.size() == 1);
    CHECK(session.attempts[0].accepted);
    CHECK(session.gateway_calls == 1);
    CHECK(session.stability_confirmed);
    CHECK(session.best_ratio == doctest::Approx(1.0));

    // Session store now holds one parseable line.
    auto rows = load_sessions(config.paths.session_store);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].status_kind == "repaired");
    CHECK(rows[0].repaired_round == 0);
}

TEST_CASE("AF repair with a stitch reject consumes a round and is fed back") {
    TempDir tmp("e2e-af1");
    Config config = testing::fixture_config(tmp.path);
    config.stability_runs = 2;

    testing::ScriptedBackend backend;
    backend.script("def test_bases",
                   {"sorry, here is prose without tags",
                    testing::wrap_repair(kBasesRepair)});

    auto bench = make_case("test_bases", "Api.bases", kBasesFm1, "af");
    auto result = run_repair_case(bench, testing::miniproj_dir(),
                                  RepairMode::AssertionFailure, PromptSetting::NoSlice,
                                  config, backend);
    REQUIRE(result.session.has_value());
    const RepairSession& session = *result.session;
    CHECK(session.final_status.kind == FinalStatus::Kind::RepairedAtRound);
    CHECK(session.final_status.round == 1);
    REQUIRE(session.attempts.size() == 2);
    CHECK(session.attempts[0].stitch_reason == StitchRejectReason::MissingTags);
    CHECK_FALSE(session.attempts[0].parsed_ok);
    CHECK(session.attempts[1].accepted);
    // The reject reason went back to the model.
    bool saw_reason = false;
    for (const ChatMessage& msg : session.transcript) {
        saw_reason = saw_reason || contains(msg.content, "MissingTags");
    }
    CHECK(saw_reason);
}

TEST_CASE("AF: candidate that passes by dodging the focal method is rejected") {
    TempDir tmp("e2e-af-dodge");
    Config config = testing::fixture_config(tmp.path);
    config.budget_af = 1;
    config.stability_runs = 2;

    // The dodge passes but never calls bases(): coverage regresses, rejected.
    const char* dodge =
        "def test_bases():\n"
        "    api = Api(\"key\")\n"
        "    assert api.api_key == \"key\"";
    testing::ScriptedBackend backend;
    backend.script("def test_bases", {testing::wrap_repair(dodge)});

    auto bench = make_case("test_bases", "Api.bases", kBasesFm1, "af");
    auto result = run_repair_case(bench, testing::miniproj_dir(),
                                  RepairMode::AssertionFailure, PromptSetting::NoSlice,
                                  config, backend);
    REQUIRE(result.session.has_value());
    const RepairSession& session = *result.session;
    CHECK(session.final_status.kind == FinalStatus::Kind::BudgetExhausted);
    REQUIRE(session.attempts.size() == 2);
    CHECK(session.attempts[0].outcome_kind == OutcomeKind::Pass);
    CHECK_FALSE(session.attempts[0].accepted);
}

TEST_CASE("CC repair: partial candidate lifts best ratio 0.6 -> 0.8, never accepted") {
    TempDir tmp("e2e-cc");
    Config config = testing::fixture_config(tmp.path);
    config.budget_cc = 3;  // keep the scripted loop short; acceptance uses 10
    config.stability_runs = 2;

    testing::ScriptedBackend backend;
    backend.script("def test_validate_flag",
                   {testing::wrap_repair(kValidateFlagPartialRepair)});

    auto bench = make_case("test_validate_flag", "validate_flag", kValidateFlagFm1, "cc");
    auto result = run_repair_case(bench, testing::miniproj_dir(),
                                  RepairMode::CoverageImprovement, PromptSetting::NoSlice,
                                  config, backend);
    REQUIRE(result.session.has_value());
    const RepairSession& session = *result.session;
    CHECK(session.final_status.kind == FinalStatus::Kind::BudgetExhausted);
    CHECK(session.baseline_ratio == doctest::Approx(0.6));
    CHECK(session.best_ratio == doctest::Approx(0.8));
    CHECK(session.attempts.size() == 4);  // round 0 + budget 3
    CHECK(session.gateway_calls == 4);
    // Best-so-far is monotone nondecreasing over rounds.
    double best = session.baseline_ratio;
    for (const RepairAttempt& attempt : session.attempts) {
        if (attempt.outcome_kind == OutcomeKind::Pass && attempt.ratio) {
            best = std::max(best, *attempt.ratio);
        }
        CHECK(best <= session.best_ratio + 1e-9);
    }
}

TEST_CASE("validator: no failure means no session") {
    TempDir tmp("e2e-skip");
    Config config = testing::fixture_config(tmp.path);
    testing::ScriptedBackend backend;

    // FM1 == FM0: nothing to repair.
    MethodIndex index = index_project(testing::miniproj_dir());
    const MethodRecord* focal = index.find_qualified("Api.bases");
    auto bench = make_case("test_bases", "Api.bases", dedent(focal->source), "af");
    auto result = run_repair_case(bench, testing::miniproj_dir(),
                                  RepairMode::AssertionFailure, PromptSetting::NoSlice,
                                  config, backend);
    CHECK_FALSE(result.session.has_value());
    CHECK(contains(result.skipped_reason, "validator saw no assertion failure"));
}

TEST_CASE("aborted session on a replay miss carries the missing key") {
    TempDir tmp("e2e-miss");
    Config config = testing::fixture_config(tmp.path);
    auto store = std::make_shared<ReplayStore>();  // empty on purpose
    ReplayBackend backend(store);

    auto bench = make_case("test_bases", "Api.bases", kBasesFm1, "af");
    auto result = run_repair_case(bench, testing::miniproj_dir(),
                                  RepairMode::AssertionFailure, PromptSetting::NoSlice,
                                  config, backend);
    REQUIRE(result.session.has_value());
    CHECK(result.session->final_status.kind == FinalStatus::Kind::Aborted);
    CHECK(result.session->final_status.reason.rfind("ReplayMiss:", 0) == 0);
    CHECK(result.session->final_status.reason.size() > std::string("ReplayMiss:").size());
}

TEST_CASE("accepted repair touches only the test method's region") {
    TempDir tmp("e2e-contain");
    Config config = testing::fixture_config(tmp.path);
    config.stability_runs = 2;

    testing::ScriptedBackend backend;
    backend.script("def test_bases", {testing::wrap_repair(kBasesRepair)});
    auto bench = make_case("test_bases", "Api.bases", kBasesFm1, "af");
    auto result = run_repair_case(bench, testing::miniproj_dir(),
                                  RepairMode::AssertionFailure, PromptSetting::NoSlice,
                                  config, backend);
    REQUIRE(result.session.has_value());
    REQUIRE(result.session->final_status.kind == FinalStatus::Kind::RepairedAtRound);

    // Re-materialize the repair and byte-compare outside the test span.
    ProjectSnapshot sandbox =
        materialize_sandbox(testing::miniproj_dir(), config.runner, tmp.path / "verify");
    const MethodRecord target = *sandbox.index.find("tests/test_api.py", "test_bases");
    sandbox = replace_method(std::move(sandbox), target, result.session->accepted_source);

    const auto original = split_file_lines(
        read_file(testing::miniproj_dir() / "tests" / "test_api.py"));
    const auto repaired =
        split_file_lines(read_file(sandbox.root / "tests" / "test_api.py"));
    for (int line = 1; line < target.span.start; ++line) {
        CHECK(original.lines[line - 1] == repaired.lines[line - 1]);
    }
    const long shift = static_cast<long>(repaired.lines.size()) -
                       static_cast<long>(original.lines.size());
    for (size_t line = target.span.end; line < original.lines.size(); ++line) {
        CHECK(original.lines[line] == repaired.lines[static_cast<size_t>(
                                          static_cast<long>(line) + shift)]);
    }
}

TEST_CASE("worker pool: two cases repaired concurrently, store intact") {
    TempDir tmp("e2e-pool");
    Config config = testing::fixture_config(tmp.path);
    config.workers = 2;
    config.stability_runs = 2;

    testing::ScriptedBackend backend;
    backend.script("def test_bases", {testing::wrap_repair(kBasesRepair)});
    backend.script("def test_enterprise",
                   {testing::wrap_repair(
                       "def test_enterprise():\n"
                       "    api = Api(\"key\")\n"
                       "    enterprise = api.enterprise(\"entUB\")\n"
                       "    assert enterprise[\"id\"] == \"invalid_id\"\n"
                       "    other = api.enterprise(\"entA\")\n"
                       "    assert other[\"id\"] == \"entA\"")});

    std::vector<BenchmarkCase> cases = {
        make_case("test_bases", "Api.bases", kBasesFm1, "af"),
        make_case("test_enterprise", "Api.enterprise",
                  "def enterprise(self, account_id):\n"
                  "    if account_id == \"entUB\":\n"
                  "        return {\"id\": \"invalid_id\", \"kind\": \"enterprise\"}\n"
                  "    return {\"id\": account_id, \"kind\": \"enterprise\"}",
                  "af")};
    BatchResult batch = run_repair_batch(cases, testing::miniproj_dir(),
                                         RepairMode::AssertionFailure, PromptSetting::NoSlice,
                                         config, backend);
    CHECK(batch.sessions == 2);
    CHECK(batch.skipped == 0);
    auto rows = load_sessions(config.paths.session_store);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        CHECK(row.status_kind == "repaired");
    }
}

TEST_CASE("commit-pair case: transplanted old test is repaired at head") {
    TempDir tmp("e2e-commitpair");
    Config config = testing::fixture_config(tmp.path);
    config.stability_runs = 2;

    // Head working tree: the calc project after its full history.
    const fs::path repo = tmp.path / "repo";
    testing::build_history_fixture(repo);
    MethodIndex head = index_project(repo);
    const MethodRecord* fm_head = head.find("pkg/calc.py", "add");
    const MethodRecord* ut_head = head.find("tests/test_calc.py", "test_add");
    REQUIRE(fm_head != nullptr);
    REQUIRE(ut_head != nullptr);

    BenchmarkCase bench;
    bench.kind = "commit_pair";
    bench.target = "af";
    bench.test_file = ut_head->file;
    bench.test_qualified = ut_head->qualified_name;
    // The historical test from before the shift-by-one change.
    bench.test_source = "def test_add():\n    assert add(2, 3) == 5";
    bench.test_span = ut_head->span;
    bench.fm_file = fm_head->file;
    bench.fm_qualified = fm_head->qualified_name;
    // FM0: the focal method as it was at that commit.
    bench.fm0_source = "def add(a, b):\n    total = a+b\n    return total";
    bench.fm0_span = {1, 3};
    bench.fm1_source = dedent(fm_head->source);
    bench.validated = true;

    testing::ScriptedBackend backend;
    backend.script("def test_add",
                   {testing::wrap_repair("def test_add():\n"
                                         "    assert add(2, 3) == 6\n"
                                         "    assert add(-1, 1) == 0")});
    auto result = run_repair_case(bench, repo, RepairMode::AssertionFailure,
                                  PromptSetting::NoSlice, config, backend);
    REQUIRE(result.session.has_value());
    CHECK(result.session->final_status.kind == FinalStatus::Kind::RepairedAtRound);
    CHECK(result.session->final_status.round == 0);
    CHECK(result.session->stability_confirmed);
    // The prompt carried the historical-to-head diff.
    bool saw_diff = false;
    for (const ChatMessage& msg : result.session->transcript) {
        saw_diff = saw_diff || contains(msg.content, "+    if a < 0:");
    }
    CHECK(saw_diff);
}
