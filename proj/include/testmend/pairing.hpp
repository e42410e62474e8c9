#pragma once

#include "testmend/gateway.hpp"
#include "testmend/project.hpp"
#include "testmend/pysrc.hpp"

#include <optional>
#include <string>
#include <vector>

namespace testmend {

struct PairCandidate {
    std::string method;  // qualified name
    std::optional<double> jaccard;
    std::optional<double> llm_prob;
};

struct FmUtPair {
    TestRecord test;
    MethodRecord focal;
    double jaccard = 0.0;
    double llm_prob = 0.0;
    bool dynamically_validated = false;
};

class MalformedResponse : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

double jaccard_score(const TokenSet& a, const TokenSet& b);

// Test-name tokens for Eq.-style matching: final dotted segment, with the
// leading test/tests fragment dropped.
TokenSet test_name_tokens(const std::string& test_name);

std::optional<PairCandidate> jaccard_candidate(const TestRecord& test,
                                               const std::vector<CallSite>& call_sites,
                                               const MethodIndex& index);

// Parses "name:prob, name:prob" style replies, clamping probabilities into
// [0,1] and sorting by descending probability. Retries twice on a reply with
// no parseable entries, then gives up with an empty list.
std::vector<PairCandidate> llm_candidate(const TestRecord& test,
                                         ChatBackend& backend,
                                         const GenParams& params);

std::vector<PairCandidate> parse_candidate_reply(const std::string& reply);

std::optional<std::string> concord(const std::optional<PairCandidate>& jc,
                                   const std::vector<PairCandidate>& lc);

// Runs the test once in the snapshot and marks the pair validated when at
// least one focal line was covered.
FmUtPair validate_pair_dynamic(FmUtPair pair, const ProjectSnapshot& snapshot);

std::string pairing_prompt(const TestRecord& test);

} // namespace testmend
