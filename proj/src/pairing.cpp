#include "testmend/pairing.hpp"

#include "testmend/runner.hpp"
#include "testmend/util.hpp"

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <set>

namespace testmend {

double jaccard_score(const TokenSet& a, const TokenSet& b) {
    if (a.tokens.empty() && b.tokens.empty()) {
        return 1.0;
    }
    size_t inter = 0;
    for (const std::string& t : a.tokens) {
        if (b.tokens.count(t) > 0) {
            ++inter;
        }
    }
    const size_t uni = a.tokens.size() + b.tokens.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

TokenSet test_name_tokens(const std::string& test_name) {
    std::vector<std::string> fragments = tokenize_fragments(test_name);
    if (!fragments.empty() && (fragments.front() == "test" || fragments.front() == "tests")) {
        fragments.erase(fragments.begin());
    }
    TokenSet out;
    for (std::string& frag : fragments) {
        if (!frag.empty()) {
            out.tokens.insert(std::move(frag));
        }
    }
    return out;
}

std::optional<PairCandidate> jaccard_candidate(const TestRecord& test,
                                               const std::vector<CallSite>& call_sites,
                                               const MethodIndex& index) {
    const TokenSet test_tokens = test_name_tokens(test.qualified_name);

    std::set<std::string> candidates;
    for (const CallSite& site : call_sites) {
        if (site.resolved) {
            candidates.insert(*site.resolved);
        } else {
            std::vector<const MethodRecord*> matches = index.resolve_name(site.final_segment());
            if (!matches.empty()) {
                candidates.insert(matches.front()->qualified_name);
            }
        }
    }
    if (candidates.empty()) {
        return std::nullopt;
    }

    std::optional<PairCandidate> best;
    for (const std::string& qualified : candidates) {
        const double score = jaccard_score(test_tokens, tokenize_identifier(qualified));
        // std::set iteration is ordered, so "greater" keeps the
        // lexicographically smallest name on ties.
        if (!best || score > *best->jaccard) {
            best = PairCandidate{qualified, score, std::nullopt};
        }
    }
    return best;
}

std::vector<PairCandidate> parse_candidate_reply(const std::string& reply) {
    std::vector<PairCandidate> out;
    std::string normalized = reply;
    std::replace(normalized.begin(), normalized.end(), '\n', ',');
    size_t start = 0;
    while (start <= normalized.size()) {
        size_t comma = normalized.find(',', start);
        std::string entry = strip(normalized.substr(start, comma - start));
        start = comma == std::string::npos ? normalized.size() + 1 : comma + 1;
        if (entry.empty()) {
            continue;
        }
        size_t colon = entry.rfind(':');
        if (colon == std::string::npos || colon == 0) {
            continue;
        }
        const std::string name = strip(entry.substr(0, colon));
        const std::string prob_text = strip(entry.substr(colon + 1));
        if (name.empty() || prob_text.empty()) {
            continue;
        }
        char* end = nullptr;
        double prob = std::strtod(prob_text.c_str(), &end);
        if (end == prob_text.c_str()) {
            continue;
        }
        prob = std::clamp(prob, 0.0, 1.0);
        out.push_back(PairCandidate{name, std::nullopt, prob});
    }
    std::stable_sort(out.begin(), out.end(), [](const PairCandidate& a, const PairCandidate& b) {
        return *a.llm_prob > *b.llm_prob;
    });
    return out;
}

std::string pairing_prompt(const TestRecord& test) {
    std::string prompt;
    prompt += "Identify the primary focal method that the following unit test exercises.\n";
    prompt += "Consider every method the test calls and reply with the fully qualified\n";
    prompt += "method names and probability scores, formatted exactly as\n";
    prompt += "`name:probability` entries separated by commas, highest probability first.\n";
    prompt += "\nTest name: " + test.qualified_name + "\n";
    prompt += "Test body:\n" + test.source + "\n";
    return prompt;
}

std::vector<PairCandidate> llm_candidate(const TestRecord& test,
                                         ChatBackend& backend,
                                         const GenParams& params) {
    const std::string prompt = pairing_prompt(test);
    for (int attempt = 0; attempt < 3; ++attempt) {
        ChatHistory history{{"user", prompt}};
        std::string reply;
        try {
            reply = backend.complete(history, params);
        } catch (const ReplayMiss&) {
            throw;
        }
        std::vector<PairCandidate> parsed = parse_candidate_reply(reply);
        if (!parsed.empty()) {
            return parsed;
        }
        std::cerr << "[testmend] unparseable focal-method reply for " << test.qualified_name
                  << " (attempt " << attempt + 1 << ")\n";
    }
    return {};
}

std::optional<std::string> concord(const std::optional<PairCandidate>& jc,
                                   const std::vector<PairCandidate>& lc) {
    if (!jc || lc.empty()) {
        return std::nullopt;
    }
    if (jc->method == lc.front().method) {
        return jc->method;
    }
    return std::nullopt;
}

FmUtPair validate_pair_dynamic(FmUtPair pair, const ProjectSnapshot& snapshot) {
    pair.dynamically_validated = false;
    try {
        auto [outcome, report] = run_test_isolated(snapshot, test_node_id(pair.test));
        const FileCoverage* fc = report.find(pair.focal.file);
        if (fc != nullptr) {
            // Body lines only: the def header runs at import, not on call.
            int body_start = method_body_start(pair.focal);
            if (body_start > pair.focal.span.end) {
                body_start = pair.focal.span.start;  // one-line def
            }
            for (int line = body_start; line <= pair.focal.span.end; ++line) {
                if (fc->covered_lines.count(line) > 0) {
                    pair.dynamically_validated = true;
                    break;
                }
            }
        }
    } catch (const ReportMissing& e) {
        std::cerr << "[testmend] dynamic validation runner failure: " << e.what() << "\n";
    }
    return pair;
}

} // namespace testmend
