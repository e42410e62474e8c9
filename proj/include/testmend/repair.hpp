#pragma once

#include "testmend/diff.hpp"
#include "testmend/gateway.hpp"
#include "testmend/pairing.hpp"
#include "testmend/prompt.hpp"
#include "testmend/project.hpp"
#include "testmend/runner.hpp"
#include "testmend/slicing.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace testmend {

struct RepairAttempt {
    int round = 0;
    std::string response_digest;
    std::string raw_response;
    bool parsed_ok = false;
    StitchRejectReason stitch_reason = StitchRejectReason::None;
    std::string candidate_source;
    std::vector<std::string> modification_types;
    std::optional<OutcomeKind> outcome_kind;
    std::optional<double> ratio;  // focal-method coverage after the candidate run
    bool accepted = false;
};

struct FinalStatus {
    enum class Kind { RepairedAtRound, BudgetExhausted, Aborted };
    Kind kind = Kind::BudgetExhausted;
    int round = -1;          // for RepairedAtRound
    std::string reason;      // for Aborted

    std::string to_string() const;
};

struct RepairSession {
    std::string session_id;
    std::string test_id;
    std::string focal_qualified_name;
    FmUtPair pair;
    RepairMode mode = RepairMode::AssertionFailure;
    PromptSetting setting = PromptSetting::NoSlice;
    int budget = 0;
    std::vector<RepairAttempt> attempts;
    FinalStatus final_status;
    double baseline_ratio = 1.0;   // session's starting focal coverage
    double best_ratio = 0.0;       // best passing candidate (CC); final ratio otherwise
    std::optional<MethodCoverage> best_coverage;
    double wall_time_s = 0.0;
    int gateway_calls = 0;
    std::string accepted_source;
    bool stability_confirmed = false;
    ChatHistory transcript;        // full prompt/response history
};

// Everything repair_loop needs; assembled by the driver after the validator
// confirmed the failure and the slices were collected.
struct RepairContext {
    fs::path pristine_root;        // project with FM0 in place
    fs::path sandbox_base;
    RunnerConfig runner;
    FmUtPair pair;                 // pair.focal is the FM0 record
    std::string fm1_source;
    MethodDiff diff;               // FM0 -> FM1
    MethodCoverage fm0_baseline;   // UT0 on FM0, pre-change
    double initial_fm1_ratio = 0.0;
    PromptPayload initial_payload;
    StaticSlice static_ctx;
    std::string initial_dynamic_xml;
    GenParams params;
    int budget = 5;
    int stability_runs = 10;
};

struct CandidateValidation {
    TestOutcome outcome;
    MethodCoverage coverage;       // of FM1 after the candidate run
    bool accepted = false;
    fs::path sandbox_root;         // sandbox holding the candidate
    std::string candidate_test_id;
};

// Injects FM1 and the candidate test into a fresh sandbox, runs it, and
// applies the mode's success predicate.
CandidateValidation validate_candidate(RepairMode mode,
                                       const RepairContext& ctx,
                                       const std::string& candidate_source,
                                       const MethodCoverage& baseline);

RepairSession repair_loop(const RepairContext& ctx,
                          RepairMode mode,
                          PromptSetting setting,
                          ChatBackend& backend);

// JSON-lines persistence.
std::string session_to_json_line(const RepairSession& session);
void append_session(const fs::path& store, const RepairSession& session);
void write_transcripts(const fs::path& store_dir, const RepairSession& session);

} // namespace testmend
