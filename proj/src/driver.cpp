#include "testmend/driver.hpp"

#include "testmend/slicing.hpp"
#include "testmend/util.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace testmend {

using json = nlohmann::json;

std::string benchmark_case_to_json_line(const BenchmarkCase& c) {
    json doc = {
        {"kind", c.kind},
        {"target", c.target},
        {"test_file", c.test_file},
        {"test_qualified", c.test_qualified},
        {"test_source", c.test_source},
        {"test_span", {c.test_span.start, c.test_span.end}},
        {"fm_file", c.fm_file},
        {"fm_qualified", c.fm_qualified},
        {"fm0_source", c.fm0_source},
        {"fm0_span", {c.fm0_span.start, c.fm0_span.end}},
        {"fm1_source", c.fm1_source},
        {"change_label", c.change_label},
        {"rounds_used", c.rounds_used},
        {"validated", c.validated},
        {"jaccard", c.jaccard},
        {"llm_prob", c.llm_prob},
        {"commit_old", c.commit_old},
        {"commit_new", c.commit_new},
    };
    return doc.dump();
}

BenchmarkCase benchmark_case_from_json_line(const std::string& line) {
    json doc = json::parse(line);
    BenchmarkCase c;
    c.kind = doc.value("kind", "injection");
    c.target = doc.value("target", "af");
    c.test_file = doc.value("test_file", "");
    c.test_qualified = doc.value("test_qualified", "");
    c.test_source = doc.value("test_source", "");
    if (doc.contains("test_span")) {
        c.test_span = {doc["test_span"][0].get<int>(), doc["test_span"][1].get<int>()};
    }
    c.fm_file = doc.value("fm_file", "");
    c.fm_qualified = doc.value("fm_qualified", "");
    c.fm0_source = doc.value("fm0_source", "");
    if (doc.contains("fm0_span")) {
        c.fm0_span = {doc["fm0_span"][0].get<int>(), doc["fm0_span"][1].get<int>()};
    }
    c.fm1_source = doc.value("fm1_source", "");
    c.change_label = doc.value("change_label", "");
    c.rounds_used = doc.value("rounds_used", 0);
    c.validated = doc.value("validated", false);
    c.jaccard = doc.value("jaccard", 0.0);
    c.llm_prob = doc.value("llm_prob", 0.0);
    c.commit_old = doc.value("commit_old", "");
    c.commit_new = doc.value("commit_new", "");
    return c;
}

std::vector<BenchmarkCase> load_benchmark(const fs::path& path) {
    std::vector<BenchmarkCase> cases;
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open benchmark file: " + path.string());
    }
    std::string line;
    while (std::getline(in, line)) {
        if (strip(line).empty()) {
            continue;
        }
        cases.push_back(benchmark_case_from_json_line(line));
    }
    return cases;
}

void append_benchmark(const fs::path& path, const BenchmarkCase& c) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) {
        throw IoError("cannot append to benchmark file: " + path.string());
    }
    out << benchmark_case_to_json_line(c) << "\n";
}

BenchmarkCase benchmark_case_from_injection(const ChangeInjection& injection) {
    BenchmarkCase c;
    c.kind = "injection";
    c.target = to_string(injection.target);
    c.test_file = injection.pair.test.file;
    c.test_qualified = injection.pair.test.qualified_name;
    c.test_source = injection.pair.test.source;
    c.test_span = injection.pair.test.span;
    c.fm_file = injection.pair.focal.file;
    c.fm_qualified = injection.pair.focal.qualified_name;
    c.fm0_source = injection.pair.focal.source;
    c.fm0_span = injection.pair.focal.span;
    c.fm1_source = injection.fm1_source;
    c.change_label = injection.change_label;
    c.rounds_used = injection.rounds_used;
    c.validated = injection.validated;
    c.jaccard = injection.pair.jaccard;
    c.llm_prob = injection.pair.llm_prob;
    return c;
}

BenchmarkCase benchmark_case_from_commit_pair(const CommitPairRecord& record) {
    BenchmarkCase c;
    c.kind = "commit_pair";
    c.target = record.classification == "ReducedCoverage" ? "cc" : "af";
    c.test_file = record.ut_new.file;
    c.test_qualified = record.ut_new.qualified_name;
    c.test_source = record.ut_old.source;  // UT0 is the historical test
    c.test_span = record.ut_new.span;
    c.fm_file = record.fm_new.file;
    c.fm_qualified = record.fm_new.qualified_name;
    c.fm0_source = record.fm_old.source;
    c.fm0_span = record.fm_old.span;
    c.fm1_source = record.fm_new.source;
    c.validated = record.classification != "NoSignal";
    c.commit_old = record.commit_old;
    c.commit_new = record.commit_new;
    return c;
}

std::shared_ptr<ChatBackend> make_backend(const Config& config) {
    if (config.llm.backend == "live") {
        return std::make_shared<LiveBackend>(config.llm.endpoint, config.llm.model,
                                             config.llm.api_path);
    }
    auto store = std::make_shared<ReplayStore>(config.llm.replay_store);
    if (config.llm.backend == "record") {
        auto live = std::make_shared<LiveBackend>(config.llm.endpoint, config.llm.model,
                                                  config.llm.api_path);
        return std::make_shared<RecordingBackend>(live, store);
    }
    return std::make_shared<ReplayBackend>(store);
}

std::vector<PairOutcome> pair_project(const fs::path& project_root,
                                      const Config& config,
                                      ChatBackend& backend) {
    MethodIndex index = index_project(project_root, config.runner.test_file_glob);
    std::vector<PairOutcome> outcomes;
    for (const MethodRecord* test : index.all_tests()) {
        std::vector<CallSite> sites = extract_call_sites(*test, "");
        resolve_call_sites(sites, index);
        std::optional<PairCandidate> jc = jaccard_candidate(*test, sites, index);
        std::vector<PairCandidate> lc = llm_candidate(*test, backend, config.llm.repair);
        std::optional<std::string> focal_name = concord(jc, lc);
        if (!focal_name) {
            continue;
        }
        const MethodRecord* focal = index.find_qualified(*focal_name);
        if (focal == nullptr) {
            continue;
        }

        FmUtPair pair;
        pair.test = *test;
        pair.focal = *focal;
        pair.jaccard = jc ? jc->jaccard.value_or(0.0) : 0.0;
        pair.llm_prob = lc.empty() ? 0.0 : lc.front().llm_prob.value_or(0.0);

        ProjectSnapshot sandbox =
            materialize_sandbox(project_root, config.runner, config.paths.sandbox_root);
        pair = validate_pair_dynamic(std::move(pair), sandbox);
        std::error_code ec;
        fs::remove_all(sandbox.root, ec);

        PairOutcome outcome;
        outcome.test_id = test_node_id(pair.test);
        outcome.focal_qualified_name = pair.focal.qualified_name;
        outcome.jaccard = pair.jaccard;
        outcome.llm_prob = pair.llm_prob;
        outcome.validated = pair.dynamically_validated;
        outcomes.push_back(std::move(outcome));
    }
    return outcomes;
}

std::string pairs_to_json(const std::vector<PairOutcome>& pairs) {
    json doc = json::array();
    for (const PairOutcome& pair : pairs) {
        doc.push_back({
            {"test_id", pair.test_id},
            {"focal_qualified_name", pair.focal_qualified_name},
            {"jaccard", pair.jaccard},
            {"llm_prob", pair.llm_prob},
            {"validated", pair.validated},
        });
    }
    return doc.dump(1) + "\n";
}

namespace {

// Locates the records named by a benchmark case inside a project index.
struct CaseBindings {
    MethodRecord test;
    MethodRecord focal;
};

std::optional<CaseBindings> bind_case(const BenchmarkCase& bench, const MethodIndex& index) {
    const MethodRecord* test = index.find(bench.test_file, bench.test_qualified);
    const MethodRecord* focal = index.find(bench.fm_file, bench.fm_qualified);
    if (test == nullptr || focal == nullptr) {
        return std::nullopt;
    }
    return CaseBindings{*test, *focal};
}

} // namespace

RepairCaseResult run_repair_case(const BenchmarkCase& bench,
                                 const fs::path& project_root,
                                 RepairMode mode,
                                 PromptSetting setting,
                                 const Config& config,
                                 ChatBackend& backend) {
    RepairCaseResult result;
    const fs::path sandbox_base = config.paths.sandbox_root;

    // Pristine root: the project as given, with UT0 transplanted for
    // commit-pair cases (their failing state lives at head).
    fs::path pristine = project_root;
    struct TransplantGuard {
        fs::path root;
        ~TransplantGuard() {
            if (!root.empty()) {
                std::error_code ec;
                fs::remove_all(root, ec);
            }
        }
    } transplant;
    MethodIndex pristine_index = index_project(project_root, config.runner.test_file_glob);
    std::optional<CaseBindings> bound = bind_case(bench, pristine_index);
    if (!bound) {
        result.skipped_reason = "case methods not found in project";
        return result;
    }
    if (bench.kind == "commit_pair" && bound->test.source != bench.test_source) {
        ProjectSnapshot working =
            materialize_sandbox(project_root, config.runner, sandbox_base);
        const MethodRecord* ut_here = working.index.find(bench.test_file, bench.test_qualified);
        if (ut_here == nullptr) {
            result.skipped_reason = "test not found for transplant";
            return result;
        }
        working = replace_method(std::move(working), *ut_here, bench.test_source);
        transplant.root = working.root;
        pristine = transplant.root;
        pristine_index = working.index;
        bound = bind_case(bench, pristine_index);
        if (!bound) {
            result.skipped_reason = "case methods not found after transplant";
            return result;
        }
    }

    RepairContext ctx;
    ctx.pristine_root = pristine;
    ctx.sandbox_base = sandbox_base;
    ctx.runner = config.runner;
    ctx.pair.test = bound->test;
    ctx.pair.focal = bound->focal;
    ctx.pair.jaccard = bench.jaccard;
    ctx.pair.llm_prob = bench.llm_prob;
    ctx.pair.dynamically_validated = bench.validated;
    ctx.fm1_source = bench.fm1_source;
    ctx.params = config.llm.repair;
    ctx.budget = mode == RepairMode::CoverageImprovement ? config.budget_cc : config.budget_af;
    ctx.stability_runs = config.stability_runs;

    // Pre-change baseline: UT0 against FM0. Commit-pair cases carry FM1 in
    // the working tree, so FM0 is reconstructed from the inline source.
    {
        ProjectSnapshot fm0_sandbox = materialize_sandbox(pristine, config.runner, sandbox_base);
        const MethodRecord* fm_here =
            fm0_sandbox.index.find(ctx.pair.focal.file, ctx.pair.focal.qualified_name);
        if (fm_here != nullptr && dedent(fm_here->source) != dedent(bench.fm0_source)) {
            fm0_sandbox = replace_method(std::move(fm0_sandbox), *fm_here, bench.fm0_source);
        }
        auto [outcome, report] = run_test_isolated(fm0_sandbox, test_node_id(ctx.pair.test));
        const MethodRecord* fm0_here =
            fm0_sandbox.index.find(ctx.pair.focal.file, ctx.pair.focal.qualified_name);
        if (outcome.kind != OutcomeKind::Pass || fm0_here == nullptr) {
            std::error_code ec;
            fs::remove_all(fm0_sandbox.root, ec);
            result.skipped_reason = "UT0 does not pass on FM0";
            return result;
        }
        ctx.fm0_baseline = method_coverage(report, *fm0_here);
        std::error_code ec;
        fs::remove_all(fm0_sandbox.root, ec);
    }

    // Validator: reproduce the failure on FM1.
    ProjectSnapshot fm1_sandbox = materialize_sandbox(pristine, config.runner, sandbox_base);
    {
        const MethodRecord* fm0_here =
            fm1_sandbox.index.find(ctx.pair.focal.file, ctx.pair.focal.qualified_name);
        if (fm0_here == nullptr) {
            std::error_code ec;
            fs::remove_all(fm1_sandbox.root, ec);
            result.skipped_reason = "focal method missing";
            return result;
        }
        fm1_sandbox = replace_method(std::move(fm1_sandbox), *fm0_here, bench.fm1_source);
    }
    const MethodRecord* fm1_record =
        fm1_sandbox.index.find(ctx.pair.focal.file, ctx.pair.focal.qualified_name);
    auto [initial_outcome, initial_report] =
        run_test_isolated(fm1_sandbox, test_node_id(ctx.pair.test));
    const MethodCoverage fm1_coverage = fm1_record != nullptr
                                            ? method_coverage(initial_report, *fm1_record)
                                            : MethodCoverage{};
    ctx.initial_fm1_ratio = fm1_coverage.ratio;

    bool triggered = false;
    if (mode == RepairMode::AssertionFailure) {
        triggered = initial_outcome.kind == OutcomeKind::AssertionFailure;
        if (triggered) {
            ctx.initial_payload = payload_from_feedback(
                initial_outcome.feedback ? *initial_outcome.feedback
                                         : extract_failure_feedback(initial_outcome.raw_log));
        }
    } else {
        triggered = initial_outcome.kind == OutcomeKind::Pass &&
                    coverage_regressed(ctx.fm0_baseline, fm1_coverage);
        if (triggered) {
            ctx.initial_payload = payload_from_uncovered(fm1_coverage);
        }
    }
    if (!triggered) {
        std::error_code ec;
        fs::remove_all(fm1_sandbox.root, ec);
        result.skipped_reason = std::string("validator saw no ") +
                                (mode == RepairMode::AssertionFailure ? "assertion failure"
                                                                      : "coverage regression") +
                                " (outcome " + to_string(initial_outcome.kind) + ")";
        return result;
    }

    // FM0 -> FM1 diff over the injected records.
    MethodRecord fm0_rec = ctx.pair.focal;
    MethodRecord fm1_rec = fm1_record != nullptr ? *fm1_record : ctx.pair.focal;
    if (bench.kind == "commit_pair") {
        fm0_rec.source = bench.fm0_source;
        fm0_rec.span = bench.fm0_span;
    }
    ctx.diff = compute_method_diff(fm0_rec, fm1_rec);

    // Slice collection happens before the session so session gateway calls
    // stay within 1 + budget.
    if (setting_uses_static(setting) && fm1_record != nullptr) {
        const std::string focal_file_source = read_file(fm1_sandbox.root / fm1_record->file);
        ctx.static_ctx = static_slice(*fm1_record, focal_file_source, backend, config.llm.repair);
    }
    if (setting_uses_dynamic(setting) && fm1_record != nullptr) {
        std::vector<CallSite> sites = extract_call_sites(*fm1_record, "");
        resolve_call_sites(sites, fm1_sandbox.index);
        ctx.initial_dynamic_xml = render_dynamic_slice(
            dynamic_slice(*fm1_record, initial_report, sites, fm1_sandbox.index));
    }
    {
        std::error_code ec;
        fs::remove_all(fm1_sandbox.root, ec);
    }

    RepairSession session = repair_loop(ctx, mode, setting, backend);

    // Acceptance soundness: re-run the accepted candidate in a fresh sandbox.
    if (session.final_status.kind == FinalStatus::Kind::RepairedAtRound) {
        CandidateValidation verify =
            validate_candidate(mode, ctx, session.accepted_source, ctx.fm0_baseline);
        ProjectSnapshot stable;
        stable.root = verify.sandbox_root;
        stable.runner = config.runner;
        stable.index = index_project(verify.sandbox_root, config.runner.test_file_glob);
        session.stability_confirmed =
            verify.accepted &&
            confirm_stability(stable, verify.candidate_test_id, config.stability_runs);
        std::error_code ec;
        fs::remove_all(verify.sandbox_root, ec);
    }

    append_session(config.paths.session_store, session);
    write_transcripts(config.paths.session_store.parent_path(), session);

    result.session = std::move(session);
    return result;
}

BatchResult run_repair_batch(const std::vector<BenchmarkCase>& cases,
                             const fs::path& project_root,
                             RepairMode mode,
                             PromptSetting setting,
                             const Config& config,
                             ChatBackend& backend) {
    BatchResult batch;
    std::mutex mu;
    std::vector<std::thread> pool;
    std::atomic<size_t> cursor{0};
    const int workers = std::max(1, config.workers);

    auto work = [&]() {
        while (true) {
            const size_t i = cursor.fetch_add(1);
            if (i >= cases.size()) {
                return;
            }
            try {
                RepairCaseResult result =
                    run_repair_case(cases[i], project_root, mode, setting, config, backend);
                std::lock_guard<std::mutex> lock(mu);
                if (result.session) {
                    ++batch.sessions;
                    if (result.session->final_status.kind == FinalStatus::Kind::Aborted) {
                        if (result.session->final_status.reason.rfind("ReplayMiss", 0) == 0) {
                            ++batch.aborted_replay_miss;
                        } else {
                            ++batch.aborted_other;
                        }
                    }
                } else {
                    ++batch.skipped;
                    std::cerr << "[testmend] skipped " << cases[i].test_qualified << ": "
                              << result.skipped_reason << "\n";
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                ++batch.aborted_other;
                std::cerr << "[testmend] case failed: " << e.what() << "\n";
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }
    return batch;
}

SyntheticMineResult mine_synthetic(const fs::path& project_root,
                                   InjectionTarget target,
                                   const std::vector<PairOutcome>& pairs,
                                   const Config& config,
                                   ChatBackend& backend,
                                   const fs::path& out_path,
                                   size_t max_cases) {
    SyntheticMineResult result;
    const ChangeTypeCatalog catalog = config.change_catalog.empty()
                                          ? ChangeTypeCatalog::builtin()
                                          : ChangeTypeCatalog::load(config.change_catalog);
    MethodIndex index = index_project(project_root, config.runner.test_file_glob);

    size_t entry_cursor = config.seed % catalog.entries.size();
    for (const PairOutcome& outcome : pairs) {
        if (!outcome.validated) {
            continue;
        }
        if (max_cases > 0 && result.emitted.size() >= max_cases) {
            break;
        }
        // Recover the records from their ids.
        FmUtPair pair;
        bool found = false;
        for (const MethodRecord* test : index.all_tests()) {
            if (test_node_id(*test) == outcome.test_id) {
                pair.test = *test;
                found = true;
                break;
            }
        }
        const MethodRecord* focal = index.find_qualified(outcome.focal_qualified_name);
        if (!found || focal == nullptr) {
            ++result.failed;
            continue;
        }
        pair.focal = *focal;
        pair.jaccard = outcome.jaccard;
        pair.llm_prob = outcome.llm_prob;
        pair.dynamically_validated = outcome.validated;

        // UT0 must pass on FM0; also captures the CC baseline ratio.
        double baseline_ratio = 1.0;
        {
            ProjectSnapshot sandbox =
                materialize_sandbox(project_root, config.runner, config.paths.sandbox_root);
            auto [run, report] = run_test_isolated(sandbox, test_node_id(pair.test));
            const MethodRecord* fm_here =
                sandbox.index.find(pair.focal.file, pair.focal.qualified_name);
            const bool ok = run.kind == OutcomeKind::Pass && fm_here != nullptr;
            if (ok) {
                baseline_ratio = method_coverage(report, *fm_here).ratio;
            }
            std::error_code ec;
            fs::remove_all(sandbox.root, ec);
            if (!ok) {
                ++result.failed;
                continue;
            }
        }

        const ChangeTypeEntry& entry = catalog.entries[entry_cursor];
        entry_cursor = (entry_cursor + 1) % catalog.entries.size();
        try {
            ChangeInjection injection = inject_change(
                pair, target, entry, backend, config.llm.mining, project_root, config.runner,
                config.paths.sandbox_root, baseline_ratio, config.injection_rounds);
            BenchmarkCase bench = benchmark_case_from_injection(injection);
            append_benchmark(out_path, bench);
            result.emitted.push_back(std::move(bench));
        } catch (const AllRoundsFailed& e) {
            std::cerr << "[testmend] injection failed for " << pair.test.qualified_name << ": "
                      << e.what() << " (rounds " << e.rounds_used() << ")\n";
            ++result.failed;
        }
    }
    return result;
}

std::vector<BenchmarkCase> mine_git(const fs::path& repo,
                                    const PairLocation& location,
                                    const Config& config,
                                    const fs::path& out_path,
                                    int max_depth,
                                    const std::string& head_rev) {
    std::vector<CommitPairRecord> records =
        mine_git_history(repo, location, max_depth, head_rev);
    std::vector<BenchmarkCase> cases;
    for (CommitPairRecord& record : records) {
        classify_transplant(record, repo, config.runner, config.paths.sandbox_root);
        BenchmarkCase bench = benchmark_case_from_commit_pair(record);
        if (record.classification == "NoSignal") {
            bench.validated = false;
        }
        append_benchmark(out_path, bench);
        cases.push_back(std::move(bench));
    }
    return cases;
}

} // namespace testmend
