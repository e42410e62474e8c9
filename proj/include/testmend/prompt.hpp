#pragma once

#include "testmend/diff.hpp"
#include "testmend/gateway.hpp"
#include "testmend/pairing.hpp"
#include "testmend/slicing.hpp"

#include <optional>
#include <string>
#include <vector>

namespace testmend {

enum class RepairMode { AssertionFailure, CoverageImprovement };
enum class PromptSetting { Baseline, NoSlice, StaticSlice, DynamicSlice, StaticPlusDynamic };

const char* to_string(RepairMode mode);
const char* to_string(PromptSetting setting);
std::optional<RepairMode> repair_mode_from_string(const std::string& s);
std::optional<PromptSetting> prompt_setting_from_string(const std::string& s);

bool setting_uses_static(PromptSetting setting);
bool setting_uses_dynamic(PromptSetting setting);

// Mode-specific error payload: failure-log lines for assertion failures,
// uncovered focal lines for coverage repair.
struct PromptPayload {
    std::vector<std::string> failure_lines;
    std::vector<std::pair<int, std::string>> uncovered;
    std::string note;  // extra feedback-round context, e.g. a stitch rejection
};

PromptPayload payload_from_feedback(const FailureFeedback& feedback);
PromptPayload payload_from_uncovered(const MethodCoverage& coverage);

ChatHistory build_initial_prompt(PromptSetting setting,
                                 RepairMode mode,
                                 const FmUtPair& pair,
                                 const MethodDiff& diff,
                                 const MethodRecord& fm1_full,
                                 const PromptPayload& payload,
                                 const StaticSlice& static_ctx,
                                 const std::string& dynamic_ctx_xml);

// Appends the previous assistant turn plus a fresh user message carrying the
// new payload (and a regenerated dynamic slice for dynamic settings).
void build_feedback_prompt(ChatHistory& history,
                           const std::string& previous_response,
                           const PromptPayload& payload,
                           const std::string& dynamic_ctx_xml,
                           PromptSetting setting,
                           RepairMode mode);

enum class StitchRejectReason { None, MissingTags, MultipleTests, SyntaxUnbalanced, NotAFunction };

const char* to_string(StitchRejectReason reason);

struct StitchResult {
    bool ok = false;
    std::string test_source;  // dedented candidate
    std::vector<std::string> modification_types;
    StitchRejectReason reason = StitchRejectReason::None;
};

// Total: every response maps to exactly one of parsed / rejected.
StitchResult stitch_response(const std::string& raw);

} // namespace testmend
