#include "testmend/repair.hpp"

#include "testmend/util.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <mutex>

namespace testmend {

using json = nlohmann::json;

namespace {

constexpr double kRatioEpsilon = 1e-9;

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string candidate_test_name(const std::string& candidate_source) {
    std::vector<MethodRecord> records = extract_methods(candidate_source, "<candidate>");
    for (const MethodRecord& rec : records) {
        if (rec.qualified_name.find('.') == std::string::npos) {
            return rec.qualified_name;
        }
    }
    return "";
}

} // namespace

std::string FinalStatus::to_string() const {
    switch (kind) {
    case Kind::RepairedAtRound:
        return "repaired@" + std::to_string(round);
    case Kind::BudgetExhausted:
        return "budget_exhausted";
    case Kind::Aborted:
        return "aborted:" + reason;
    }
    return "?";
}

CandidateValidation validate_candidate(RepairMode mode,
                                       const RepairContext& ctx,
                                       const std::string& candidate_source,
                                       const MethodCoverage& baseline) {
    ProjectSnapshot sandbox = materialize_sandbox(ctx.pristine_root, ctx.runner, ctx.sandbox_base);

    const MethodRecord* fm0_here = sandbox.index.find(ctx.pair.focal.file,
                                                      ctx.pair.focal.qualified_name);
    if (fm0_here == nullptr) {
        throw RunnerFailure("focal method missing from sandbox: " + ctx.pair.focal.qualified_name);
    }
    sandbox = replace_method(std::move(sandbox), *fm0_here, ctx.fm1_source);

    const MethodRecord* test_here = sandbox.index.find(ctx.pair.test.file,
                                                       ctx.pair.test.qualified_name);
    if (test_here == nullptr) {
        throw RunnerFailure("test missing from sandbox: " + ctx.pair.test.qualified_name);
    }
    sandbox = replace_method(std::move(sandbox), *test_here, candidate_source);

    // The candidate may rename the test; run the name it actually defines.
    std::string new_name = candidate_test_name(candidate_source);
    std::string qualified = ctx.pair.test.qualified_name;
    const size_t dot = qualified.rfind('.');
    qualified = dot == std::string::npos ? new_name : qualified.substr(0, dot + 1) + new_name;
    MethodRecord run_target = ctx.pair.test;
    run_target.qualified_name = qualified;

    CandidateValidation validation;
    validation.sandbox_root = sandbox.root;
    validation.candidate_test_id = test_node_id(run_target);

    auto [outcome, report] = run_test_isolated(sandbox, validation.candidate_test_id);
    validation.outcome = std::move(outcome);

    const MethodRecord* fm1_here = sandbox.index.find(ctx.pair.focal.file,
                                                      ctx.pair.focal.qualified_name);
    if (fm1_here != nullptr) {
        validation.coverage = method_coverage(report, *fm1_here);
    }

    if (validation.outcome.kind == OutcomeKind::Pass) {
        if (mode == RepairMode::AssertionFailure) {
            validation.accepted = !coverage_regressed(baseline, validation.coverage);
        } else {
            validation.accepted = validation.coverage.ratio >= 1.0 - kRatioEpsilon;
        }
    }
    return validation;
}

RepairSession repair_loop(const RepairContext& ctx,
                          RepairMode mode,
                          PromptSetting setting,
                          ChatBackend& backend) {
    RepairSession session;
    session.pair = ctx.pair;
    session.test_id = test_node_id(ctx.pair.test);
    session.focal_qualified_name = ctx.pair.focal.qualified_name;
    session.mode = mode;
    session.setting = setting;
    session.budget = ctx.budget;
    session.baseline_ratio = mode == RepairMode::CoverageImprovement ? ctx.initial_fm1_ratio
                                                                     : ctx.fm0_baseline.ratio;
    session.best_ratio = session.baseline_ratio;
    session.session_id = sha256_hex(session.test_id + "|" + to_string(mode) + "|" +
                                    to_string(setting) + "|" + ctx.fm1_source)
                             .substr(0, 12);

    const double start = now_seconds();
    ChatHistory history = build_initial_prompt(setting, mode, ctx.pair, ctx.diff,
                                               ctx.diff.new_method, ctx.initial_payload,
                                               ctx.static_ctx, ctx.initial_dynamic_xml);

    PromptPayload next_payload = ctx.initial_payload;
    std::string next_dynamic_xml = ctx.initial_dynamic_xml;
    std::vector<fs::path> discarded_sandboxes;

    auto finish = [&](FinalStatus status) {
        session.final_status = status;
        session.wall_time_s = now_seconds() - start;
        session.transcript = history;
        for (const fs::path& path : discarded_sandboxes) {
            std::error_code ec;
            fs::remove_all(path, ec);
        }
        return session;
    };

    for (int round = 0; round <= ctx.budget; ++round) {
        RepairAttempt attempt;
        attempt.round = round;

        std::string response;
        try {
            response = backend.complete(history, ctx.params);
        } catch (const ReplayMiss& e) {
            std::cerr << "[testmend] replay miss, aborting session " << session.session_id
                      << ": missing key " << e.key() << "\n";
            return finish({FinalStatus::Kind::Aborted, -1, std::string("ReplayMiss:") + e.key()});
        } catch (const TransportError& e) {
            return finish({FinalStatus::Kind::Aborted, -1, std::string("TransportError:") + e.what()});
        }
        ++session.gateway_calls;
        attempt.raw_response = response;
        attempt.response_digest = sha256_hex(response);

        StitchResult stitch = stitch_response(response);
        attempt.stitch_reason = stitch.reason;
        attempt.parsed_ok = stitch.ok;
        attempt.modification_types = stitch.modification_types;

        if (stitch.ok) {
            attempt.candidate_source = stitch.test_source;
            CandidateValidation validation;
            try {
                validation = validate_candidate(mode, ctx, stitch.test_source, ctx.fm0_baseline);
            } catch (const RunnerFailure& e) {
                session.attempts.push_back(std::move(attempt));
                return finish({FinalStatus::Kind::Aborted, -1, std::string("RunnerFailure:") + e.what()});
            } catch (const ReportMissing& e) {
                session.attempts.push_back(std::move(attempt));
                return finish({FinalStatus::Kind::Aborted, -1, std::string("RunnerFailure:") + e.what()});
            }
            attempt.outcome_kind = validation.outcome.kind;
            attempt.ratio = validation.coverage.ratio;
            attempt.accepted = validation.accepted;
            if (validation.outcome.kind == OutcomeKind::Pass &&
                validation.coverage.ratio > session.best_ratio + kRatioEpsilon) {
                session.best_ratio = validation.coverage.ratio;
                session.best_coverage = validation.coverage;
            }

            if (validation.accepted) {
                session.accepted_source = stitch.test_source;
                if (mode == RepairMode::AssertionFailure) {
                    session.best_coverage = validation.coverage;
                    session.best_ratio = validation.coverage.ratio;
                }
                session.attempts.push_back(std::move(attempt));
                discarded_sandboxes.push_back(validation.sandbox_root);
                return finish({FinalStatus::Kind::RepairedAtRound, round, ""});
            }

            // Build the next payload from this run.
            if (mode == RepairMode::AssertionFailure) {
                if (validation.outcome.kind == OutcomeKind::Pass) {
                    PromptPayload p;
                    p.failure_lines.push_back(
                        "E  the test passed but focal-method coverage regressed below the "
                        "pre-change baseline");
                    for (const auto& [line, text] : validation.coverage.uncovered) {
                        p.failure_lines.push_back("line " + std::to_string(line) + ": " +
                                                  strip(text));
                    }
                    next_payload = p;
                } else {
                    next_payload = payload_from_feedback(
                        validation.outcome.feedback
                            ? *validation.outcome.feedback
                            : extract_failure_feedback(validation.outcome.raw_log));
                }
            } else {
                next_payload = payload_from_uncovered(validation.coverage);
            }
            if (setting_uses_dynamic(setting)) {
                // Regenerate the dynamic slice from this round's sandbox run.
                try {
                    ProjectSnapshot peek;
                    peek.root = validation.sandbox_root;
                    peek.runner = ctx.runner;
                    peek.index = index_project(validation.sandbox_root, ctx.runner.test_file_glob);
                    const MethodRecord* fm1_here =
                        peek.index.find(ctx.pair.focal.file, ctx.pair.focal.qualified_name);
                    const fs::path report_path = validation.sandbox_root / ".testmend" / "coverage.json";
                    if (fm1_here != nullptr && fs::exists(report_path)) {
                        CoverageReport report = parse_coverage_json(read_file(report_path));
                        std::vector<CallSite> sites = extract_call_sites(*fm1_here, "");
                        resolve_call_sites(sites, peek.index);
                        next_dynamic_xml =
                            render_dynamic_slice(dynamic_slice(*fm1_here, report, sites, peek.index));
                    }
                } catch (const std::exception& e) {
                    std::cerr << "[testmend] dynamic slice regeneration failed: " << e.what()
                              << "\n";
                }
            }
            discarded_sandboxes.push_back(validation.sandbox_root);
        } else {
            // A rejected round consumes budget and its reason goes back.
            next_payload.note = std::string("The previous response was rejected by the "
                                            "stitcher: ") +
                                to_string(stitch.reason) + ".";
            if (mode == RepairMode::AssertionFailure) {
                next_payload.failure_lines = {
                    std::string("E  response rejected: ") + to_string(stitch.reason)};
            }
        }

        session.attempts.push_back(std::move(attempt));
        if (round == ctx.budget) {
            break;
        }

        build_feedback_prompt(history, response, next_payload,
                              setting_uses_dynamic(setting) ? next_dynamic_xml : "",
                              setting, mode);
        next_payload.note.clear();
    }

    return finish({FinalStatus::Kind::BudgetExhausted, -1, ""});
}

std::string session_to_json_line(const RepairSession& session) {
    json attempts = json::array();
    for (const RepairAttempt& attempt : session.attempts) {
        json a = {
            {"round", attempt.round},
            {"response_digest", attempt.response_digest},
            {"stitch", to_string(attempt.stitch_reason)},
            {"accepted", attempt.accepted},
        };
        if (attempt.outcome_kind) {
            a["outcome_kind"] = to_string(*attempt.outcome_kind);
        }
        if (attempt.ratio) {
            a["ratio"] = *attempt.ratio;
        }
        if (!attempt.modification_types.empty()) {
            a["modification_types"] = attempt.modification_types;
        }
        attempts.push_back(std::move(a));
    }
    json status = {{"kind", session.final_status.kind == FinalStatus::Kind::RepairedAtRound
                                ? "repaired"
                                : session.final_status.kind == FinalStatus::Kind::BudgetExhausted
                                      ? "budget_exhausted"
                                      : "aborted"}};
    if (session.final_status.kind == FinalStatus::Kind::RepairedAtRound) {
        status["round"] = session.final_status.round;
    }
    if (session.final_status.kind == FinalStatus::Kind::Aborted) {
        status["reason"] = session.final_status.reason;
    }
    json doc = {
        {"session_id", session.session_id},
        {"pair",
         {{"test_id", session.test_id},
          {"focal_qualified_name", session.focal_qualified_name},
          {"jaccard", session.pair.jaccard},
          {"llm_prob", session.pair.llm_prob},
          {"validated", session.pair.dynamically_validated}}},
        {"mode", to_string(session.mode)},
        {"setting", to_string(session.setting)},
        {"budget", session.budget},
        {"attempts", attempts},
        {"final_status", status},
        {"baseline_ratio", session.baseline_ratio},
        {"best_ratio", session.best_ratio},
        {"wall_time_s", session.wall_time_s},
        {"gateway_calls", session.gateway_calls},
        {"stability_confirmed", session.stability_confirmed},
    };
    return doc.dump();
}

namespace {
std::mutex g_store_mutex;
}

void append_session(const fs::path& store, const RepairSession& session) {
    std::lock_guard<std::mutex> lock(g_store_mutex);
    if (store.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(store.parent_path(), ec);
    }
    std::ofstream out(store, std::ios::app | std::ios::binary);
    if (!out) {
        throw IoError("cannot append to session store: " + store.string());
    }
    out << session_to_json_line(session) << "\n";
}

void write_transcripts(const fs::path& store_dir, const RepairSession& session) {
    json doc;
    doc["session_id"] = session.session_id;
    doc["messages"] = json::array();
    for (const ChatMessage& msg : session.transcript) {
        doc["messages"].push_back({{"role", msg.role}, {"content", msg.content}});
    }
    const std::string payload = doc.dump(1);
    const std::string digest = sha256_hex(payload);
    write_file(store_dir / "transcripts" / (digest + ".json"), payload);
}

} // namespace testmend
