#include "testmend/prompt.hpp"

#include "testmend/util.hpp"

#include <sstream>

namespace testmend {

const char* to_string(RepairMode mode) {
    switch (mode) {
    case RepairMode::AssertionFailure: return "af";
    case RepairMode::CoverageImprovement: return "cc";
    }
    return "?";
}

const char* to_string(PromptSetting setting) {
    switch (setting) {
    case PromptSetting::Baseline: return "baseline";
    case PromptSetting::NoSlice: return "nc";
    case PromptSetting::StaticSlice: return "s";
    case PromptSetting::DynamicSlice: return "d";
    case PromptSetting::StaticPlusDynamic: return "sd";
    }
    return "?";
}

std::optional<RepairMode> repair_mode_from_string(const std::string& s) {
    if (s == "af") {
        return RepairMode::AssertionFailure;
    }
    if (s == "cc") {
        return RepairMode::CoverageImprovement;
    }
    return std::nullopt;
}

std::optional<PromptSetting> prompt_setting_from_string(const std::string& s) {
    if (s == "baseline") return PromptSetting::Baseline;
    if (s == "nc") return PromptSetting::NoSlice;
    if (s == "s") return PromptSetting::StaticSlice;
    if (s == "d") return PromptSetting::DynamicSlice;
    if (s == "sd") return PromptSetting::StaticPlusDynamic;
    return std::nullopt;
}

bool setting_uses_static(PromptSetting setting) {
    return setting == PromptSetting::StaticSlice || setting == PromptSetting::StaticPlusDynamic;
}

bool setting_uses_dynamic(PromptSetting setting) {
    return setting == PromptSetting::DynamicSlice || setting == PromptSetting::StaticPlusDynamic;
}

PromptPayload payload_from_feedback(const FailureFeedback& feedback) {
    PromptPayload payload;
    payload.failure_lines = feedback.lines;
    return payload;
}

PromptPayload payload_from_uncovered(const MethodCoverage& coverage) {
    PromptPayload payload;
    payload.uncovered = coverage.uncovered;
    return payload;
}

namespace {

std::string render_payload(const PromptPayload& payload, RepairMode mode) {
    std::ostringstream out;
    if (mode == RepairMode::AssertionFailure) {
        out << "    <failure_message>\n";
        for (const std::string& line : payload.failure_lines) {
            out << line << "\n";
        }
        out << "    </failure_message>\n";
    } else {
        out << "    <uncovered_lines>\n";
        for (const auto& [line, text] : payload.uncovered) {
            out << "line " << line << ": " << strip(text) << "\n";
        }
        out << "    </uncovered_lines>\n";
    }
    return out.str();
}

std::string render_static(const StaticSlice& slice) {
    std::ostringstream out;
    out << "    <static_context>\n";
    for (size_t i = 0; i < slice.contexts.size(); ++i) {
        out << "<context-" << i + 1 << ">\n"
            << slice.contexts[i] << "\n"
            << "</context-" << i + 1 << ">\n";
    }
    out << "    </static_context>\n";
    return out.str();
}

std::string instructions_text(RepairMode mode, bool baseline) {
    const char* focal_tag = baseline ? "<changed_focal_method>" : "<diff_focal_method>";
    const char* focal_desc = baseline
        ? "The changed focal method is given in the"
        : "The diff between the original and the changed focal method is given in the";
    std::ostringstream out;
    out << "<instructions>\n";
    if (mode == RepairMode::AssertionFailure) {
        out << "    A unit test that previously passed is now failing because the focal\n"
               "    method it exercises was updated. You have the following information:\n"
               "    1. The failing unit test is provided in the `<unit_test>` tag.\n"
               "    2. The failure output from the test run is given in the\n"
               "    `<failure_message>` tag.\n";
    } else {
        out << "    A unit test still passes, but after an update to the focal method it\n"
               "    exercises it no longer covers every executable line of that method.\n"
               "    You have the following information:\n"
               "    1. The unit test is provided in the `<unit_test>` tag.\n"
               "    2. The focal-method lines the test leaves uncovered are listed in the\n"
               "    `<uncovered_lines>` tag.\n";
    }
    out << "    3. " << focal_desc << " `" << focal_tag << "` tag.\n";
    out << "    Extra context, when present, appears in static_context and\n"
           "    dynamic_context tags.\n"
           "    Your task is to:\n"
           "    1. Repair the test method so it accounts for the change in the focal\n"
           "    method.\n"
           "        a. Wrap your repaired test in a `<repaired_test_method>` tag.\n"
           "        b. Mention the changes you made using `<modification_type>` tags.\n"
           "        c. Wrap the entire response, `<repaired_test_method>` and\n"
           "        `<modification_type>` tags included, in a `<root>` tag so the\n"
           "        output is well-formed XML.\n"
           "    2. Follow the constraints provided under the `<constraints>` tag.\n"
           "</instructions>\n";
    return out.str();
}

std::string constraints_text(RepairMode mode) {
    std::string out = "<constraints>\n    The repaired test must pass";
    if (mode == RepairMode::CoverageImprovement) {
        out += " and cover the listed uncovered lines";
    }
    out += ".\n</constraints>\n";
    return out;
}

} // namespace

ChatHistory build_initial_prompt(PromptSetting setting,
                                 RepairMode mode,
                                 const FmUtPair& pair,
                                 const MethodDiff& diff,
                                 const MethodRecord& fm1_full,
                                 const PromptPayload& payload,
                                 const StaticSlice& static_ctx,
                                 const std::string& dynamic_ctx_xml) {
    const bool baseline = setting == PromptSetting::Baseline;
    std::ostringstream out;
    out << instructions_text(mode, baseline);
    out << constraints_text(mode);
    out << "\n<data>\n";
    if (baseline) {
        out << "    <changed_focal_method>\n" << fm1_full.source << "\n    </changed_focal_method>\n";
    } else {
        out << "    <diff_focal_method>\n" << diff.unified << "\n    </diff_focal_method>\n";
    }
    out << "    <unit_test>\n" << pair.test.source << "\n    </unit_test>\n";
    out << render_payload(payload, mode);
    if (setting_uses_static(setting)) {
        out << render_static(static_ctx);
    }
    if (setting_uses_dynamic(setting)) {
        out << "    <dynamic_context>\n" << dynamic_ctx_xml << "\n    </dynamic_context>\n";
    }
    out << "</data>";
    return ChatHistory{{"user", out.str()}};
}

void build_feedback_prompt(ChatHistory& history,
                           const std::string& previous_response,
                           const PromptPayload& payload,
                           const std::string& dynamic_ctx_xml,
                           PromptSetting setting,
                           RepairMode mode) {
    history.push_back({"assistant", previous_response});
    std::ostringstream out;
    if (!payload.note.empty()) {
        out << payload.note << "\n";
    }
    if (mode == RepairMode::AssertionFailure) {
        out << "The repaired test still fails. The fresh failure output is below.\n";
    } else {
        out << "The repaired test does not yet cover every focal-method line. The\n"
               "remaining uncovered lines are below.\n";
    }
    out << "Produce an improved test, wrapped exactly as before in a <root> tag\n"
           "containing one <repaired_test_method> and your <modification_type> tags.\n\n";
    out << render_payload(payload, mode);
    if (setting_uses_dynamic(setting) && !dynamic_ctx_xml.empty()) {
        out << "    <dynamic_context>\n" << dynamic_ctx_xml << "\n    </dynamic_context>\n";
    }
    std::string text = out.str();
    while (!text.empty() && text.back() == '\n') {
        text.pop_back();
    }
    history.push_back({"user", text});
}

const char* to_string(StitchRejectReason reason) {
    switch (reason) {
    case StitchRejectReason::None: return "ok";
    case StitchRejectReason::MissingTags: return "MissingTags";
    case StitchRejectReason::MultipleTests: return "MultipleTests";
    case StitchRejectReason::SyntaxUnbalanced: return "SyntaxUnbalanced";
    case StitchRejectReason::NotAFunction: return "NotAFunction";
    }
    return "?";
}

namespace {

size_t count_occurrences(const std::string& text, const std::string& needle) {
    size_t count = 0;
    size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

// Bracket/quote balance over the candidate text, honoring Python string
// syntax so brackets inside literals do not count.
bool delimiters_balanced(const std::string& text) {
    try {
        scan_python_lines(text);
        return true;
    } catch (const ParseError&) {
        return false;
    }
}

} // namespace

StitchResult stitch_response(const std::string& raw) {
    StitchResult result;

    const size_t root_open = raw.find("<root>");
    const size_t root_close = raw.rfind("</root>");
    if (root_open == std::string::npos || root_close == std::string::npos ||
        root_close < root_open) {
        result.reason = StitchRejectReason::MissingTags;
        return result;
    }
    const std::string body = raw.substr(root_open + 6, root_close - root_open - 6);

    const size_t open_count = count_occurrences(body, "<repaired_test_method>");
    const size_t close_count = count_occurrences(body, "</repaired_test_method>");
    if (open_count == 0 || close_count == 0) {
        result.reason = StitchRejectReason::MissingTags;
        return result;
    }
    if (open_count > 1 || close_count > 1) {
        result.reason = StitchRejectReason::MultipleTests;
        return result;
    }
    const size_t test_open = body.find("<repaired_test_method>") + 22;
    const size_t test_close = body.find("</repaired_test_method>");
    if (test_close < test_open) {
        result.reason = StitchRejectReason::MissingTags;
        return result;
    }
    std::string candidate = body.substr(test_open, test_close - test_open);

    // Strip an optional fenced-code wrapper, then leading/trailing blanks.
    std::vector<std::string> lines = split_lines(candidate);
    while (!lines.empty() && strip(lines.front()).empty()) {
        lines.erase(lines.begin());
    }
    while (!lines.empty() && strip(lines.back()).empty()) {
        lines.pop_back();
    }
    if (!lines.empty() && strip(lines.front()).rfind("```", 0) == 0) {
        lines.erase(lines.begin());
    }
    if (!lines.empty() && strip(lines.back()) == "```") {
        lines.pop_back();
    }
    candidate = dedent(join_lines(lines));

    if (!delimiters_balanced(candidate)) {
        result.reason = StitchRejectReason::SyntaxUnbalanced;
        return result;
    }
    if (!parses_as_single_function(candidate)) {
        result.reason = StitchRejectReason::NotAFunction;
        return result;
    }

    // Modification tags are optional metadata.
    size_t pos = 0;
    while (true) {
        const size_t open = body.find("<modification_type>", pos);
        if (open == std::string::npos) {
            break;
        }
        const size_t close = body.find("</modification_type>", open);
        if (close == std::string::npos) {
            break;
        }
        result.modification_types.push_back(strip(body.substr(open + 19, close - open - 19)));
        pos = close + 20;
    }

    result.ok = true;
    result.test_source = candidate;
    return result;
}

} // namespace testmend
