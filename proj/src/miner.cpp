#include "testmend/miner.hpp"

#include "testmend/runner.hpp"
#include "testmend/subprocess.hpp"
#include "testmend/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <iostream>
#include <set>

namespace testmend {

using json = nlohmann::json;

const char* to_string(InjectionTarget target) {
    return target == InjectionTarget::AssertionFailure ? "af" : "cc";
}

ChangeTypeCatalog ChangeTypeCatalog::load(const fs::path& path) {
    ChangeTypeCatalog catalog;
    json doc = json::parse(read_file(path));
    for (const auto& entry : doc) {
        catalog.entries.push_back({entry.at("label").get<std::string>(),
                                   entry.at("instruction").get<std::string>()});
    }
    return catalog;
}

const ChangeTypeEntry& ChangeTypeCatalog::by_label(const std::string& label) const {
    for (const ChangeTypeEntry& entry : entries) {
        if (entry.label == label) {
            return entry;
        }
    }
    throw std::out_of_range("no change type labeled " + label);
}

std::string normalize_structure(const std::string& source) {
    std::vector<PyLine> lines;
    try {
        lines = scan_python_lines(dedent(source));
    } catch (const ParseError&) {
        return "!unparseable!" + source;
    }

    // Token stream per logical line, prefixed with block depth.
    std::vector<int> indent_stack{0};
    std::string out;
    size_t i = 0;
    while (i < lines.size()) {
        if (!lines[i].starts_logical) {
            ++i;
            continue;
        }
        size_t j = i + 1;
        while (j < lines.size() && lines[j].continuation) {
            ++j;
        }
        const int indent = lines[i].indent;
        while (indent_stack.size() > 1 && indent < indent_stack.back()) {
            indent_stack.pop_back();
        }
        if (indent > indent_stack.back()) {
            indent_stack.push_back(indent);
        }
        const int depth = static_cast<int>(indent_stack.size()) - 1;

        // Tokenize: identifiers/numbers as words, strings verbatim, other
        // chars individually. Masked text hides strings; literal keeps them.
        std::string tokens;
        bool only_string = true;
        bool any_token = false;
        for (size_t k = i; k < j; ++k) {
            const std::string& masked = lines[k].masked;
            const std::string& literal = lines[k].literal;
            size_t c = 0;
            while (c < masked.size()) {
                if (literal[c] != ' ') {
                    size_t start = c;
                    while (c < masked.size() && literal[c] != ' ') {
                        ++c;
                    }
                    tokens += " " + literal.substr(start, c - start);
                    any_token = true;
                    continue;
                }
                char ch = masked[c];
                if (ch == ' ' || ch == '\t') {
                    ++c;
                    continue;
                }
                if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_') {
                    size_t start = c;
                    while (c < masked.size() &&
                           (std::isalnum(static_cast<unsigned char>(masked[c])) ||
                            masked[c] == '_')) {
                        ++c;
                    }
                    tokens += " " + masked.substr(start, c - start);
                } else {
                    tokens += " ";
                    tokens.push_back(ch);
                    ++c;
                }
                only_string = false;
                any_token = true;
            }
        }
        // Bare string statements (docstrings) do not count structurally.
        if (any_token && !only_string) {
            out += std::to_string(depth) + ":" + squeeze_whitespace(tokens) + "\n";
        }
        i = j;
    }
    return out;
}

bool ast_equal(const std::string& a, const std::string& b) {
    return normalize_structure(a) == normalize_structure(b);
}

std::string injection_prompt(const FmUtPair& pair,
                             InjectionTarget target,
                             const ChangeTypeEntry& entry,
                             const std::string& focal_file_source,
                             const std::string& test_file_source) {
    std::string prompt;
    prompt += "You will modify a focal method to build a test benchmark.\n";
    if (target == InjectionTarget::AssertionFailure) {
        prompt += "Goal: change the focal method so that the given unit test fails with an\n"
                  "assertion failure. The changed method must stay syntactically valid and\n"
                  "importable.\n";
    } else {
        prompt += "Goal: change the focal method so that the given unit test still passes\n"
                  "but no longer covers every executable line of the method. The changed\n"
                  "method must stay syntactically valid and importable.\n";
    }
    prompt += "Change type: " + entry.label + " - " + entry.instruction + "\n";
    prompt += "Reply with the complete changed method wrapped as\n"
              "<root><changed_focal_method>...</changed_focal_method></root>.\n";
    prompt += "\n<focal_method>\n" + pair.focal.source + "\n</focal_method>\n";
    prompt += "\n<focal_file>\n" + focal_file_source + "\n</focal_file>\n";
    prompt += "\n<test_file>\n" + test_file_source + "\n</test_file>\n";
    prompt += "\n<unit_test>\n" + pair.test.source + "\n</unit_test>\n";
    return prompt;
}

namespace {

std::optional<std::string> extract_block(const std::string& text, const std::string& tag) {
    const std::string open = "<" + tag + ">";
    const std::string close = "</" + tag + ">";
    const size_t open_pos = text.find(open);
    if (open_pos == std::string::npos) {
        return std::nullopt;
    }
    const size_t start = open_pos + open.size();
    const size_t close_pos = text.rfind(close);
    if (close_pos == std::string::npos || close_pos < start) {
        return std::nullopt;
    }
    std::string body = text.substr(start, close_pos - start);
    std::vector<std::string> lines = split_lines(body);
    while (!lines.empty() && strip(lines.front()).empty()) {
        lines.erase(lines.begin());
    }
    while (!lines.empty() && strip(lines.back()).empty()) {
        lines.pop_back();
    }
    return dedent(join_lines(lines));
}

std::string feedback_digest(const std::string& log) {
    const FailureFeedback feedback = extract_failure_feedback(log);
    std::string joined;
    for (const std::string& line : feedback.lines) {
        joined += strip(line) + "\n";
    }
    return sha256_hex(joined);
}

} // namespace

ChangeInjection inject_change(const FmUtPair& pair,
                              InjectionTarget target,
                              const ChangeTypeEntry& entry,
                              ChatBackend& backend,
                              const GenParams& params,
                              const fs::path& pristine_root,
                              const RunnerConfig& runner,
                              const fs::path& sandbox_base,
                              double fm0_baseline_ratio,
                              int max_rounds) {
    const std::string focal_file = read_file(pristine_root / pair.focal.file);
    const std::string test_file = read_file(pristine_root / pair.test.file);
    ChatHistory history{{"user", injection_prompt(pair, target, entry, focal_file, test_file)}};

    std::string prev_error_digest;
    int rounds_used = 0;
    for (int round = 0; round < max_rounds; ++round) {
        ++rounds_used;
        const std::string response = backend.complete(history, params);
        history.push_back({"assistant", response});

        std::string error_text;
        std::string error_digest;

        std::optional<std::string> fm1 = extract_block(response, "changed_focal_method");
        if (!fm1) {
            error_text = "The response did not contain a <changed_focal_method> block "
                         "inside <root>. Reply again with the required tags.";
        } else {
            ProjectSnapshot sandbox;
            bool injected = false;
            try {
                sandbox = materialize_sandbox(pristine_root, runner, sandbox_base);
                const MethodRecord* fm_here =
                    sandbox.index.find(pair.focal.file, pair.focal.qualified_name);
                if (fm_here == nullptr) {
                    throw RunnerFailure("focal method missing: " + pair.focal.qualified_name);
                }
                sandbox = replace_method(std::move(sandbox), *fm_here, *fm1);
                injected = true;
            } catch (const ParseError& e) {
                error_text = std::string("The changed method does not parse: ") + e.what();
                error_digest = sha256_hex(error_text);
            }

            if (injected) {
                auto [outcome, report] = run_test_isolated(sandbox, test_node_id(pair.test));
                const MethodRecord* fm1_here =
                    sandbox.index.find(pair.focal.file, pair.focal.qualified_name);
                const MethodCoverage cov = fm1_here != nullptr
                                               ? method_coverage(report, *fm1_here)
                                               : MethodCoverage{};
                if (target == InjectionTarget::AssertionFailure) {
                    if (outcome.kind == OutcomeKind::AssertionFailure) {
                        ChangeInjection result{pair, *fm1, entry.label, target, rounds_used, true};
                        std::error_code ec;
                        fs::remove_all(sandbox.root, ec);
                        return result;
                    }
                    if (outcome.kind == OutcomeKind::CollectionError) {
                        error_text = "The change broke compilation or import:\n";
                        for (const std::string& line : extract_failure_feedback(outcome.raw_log).lines) {
                            error_text += line + "\n";
                        }
                        error_digest = feedback_digest(outcome.raw_log);
                    } else if (outcome.kind == OutcomeKind::Pass) {
                        error_text = "The test still passes. Make a behavioral change that "
                                     "breaks one of its assertions.";
                    } else {
                        error_text = "The test failed with a non-assertion error:\n";
                        for (const std::string& line : extract_failure_feedback(outcome.raw_log).lines) {
                            error_text += line + "\n";
                        }
                    }
                } else {
                    const bool reduced = outcome.kind == OutcomeKind::Pass &&
                                         cov.ratio < fm0_baseline_ratio - 1e-9;
                    if (reduced) {
                        ChangeInjection result{pair, *fm1, entry.label, target, rounds_used, true};
                        std::error_code ec;
                        fs::remove_all(sandbox.root, ec);
                        return result;
                    }
                    if (outcome.kind == OutcomeKind::CollectionError) {
                        error_text = "The change broke compilation or import:\n";
                        for (const std::string& line : extract_failure_feedback(outcome.raw_log).lines) {
                            error_text += line + "\n";
                        }
                        error_digest = feedback_digest(outcome.raw_log);
                    } else if (outcome.kind == OutcomeKind::Pass) {
                        error_text = "The test passes but coverage of the method did not drop. "
                                     "Add code the existing test will not execute.";
                    } else {
                        error_text = "The test no longer passes:\n";
                        for (const std::string& line : extract_failure_feedback(outcome.raw_log).lines) {
                            error_text += line + "\n";
                        }
                    }
                }
                std::error_code ec;
                fs::remove_all(sandbox.root, ec);
            }
        }

        if (!error_digest.empty() && error_digest == prev_error_digest) {
            throw AllRoundsFailed("identical compilation error in consecutive rounds",
                                  rounds_used);
        }
        prev_error_digest = error_digest;
        history.push_back({"user", error_text + "\nReply again with the full changed method in "
                                                "<root><changed_focal_method> tags."});
    }
    throw AllRoundsFailed("no valid change after " + std::to_string(rounds_used) + " rounds",
                          rounds_used);
}

std::string run_git(const fs::path& repo, const std::string& args) {
    const std::string command = "git -C '" + repo.string() + "' " + args;
    CommandResult result = run_command(command, fs::current_path(), 120.0);
    if (result.exit_code != 0) {
        throw GitError("git failed (" + args + "): " + result.output);
    }
    return result.output;
}

namespace {

std::optional<MethodRecord> method_at_revision(const fs::path& repo,
                                               const std::string& rev,
                                               const std::string& file,
                                               const std::string& qualified) {
    std::string content;
    try {
        content = run_git(repo, "show '" + rev + ":" + file + "'");
    } catch (const GitError&) {
        return std::nullopt;
    }
    try {
        for (MethodRecord& rec : extract_methods(content, file)) {
            if (rec.qualified_name == qualified) {
                return rec;
            }
        }
    } catch (const ParseError&) {
        return std::nullopt;  // unparseable historical revision: skip
    }
    return std::nullopt;
}

} // namespace

std::vector<CommitPairRecord> mine_git_history(const fs::path& repo,
                                               const PairLocation& pair,
                                               int max_depth,
                                               const std::string& head_rev) {
    const std::string head = strip(run_git(repo, "rev-parse '" + head_rev + "'"));

    std::vector<std::string> commits;
    std::set<std::string> seen;
    for (const std::string& file : {pair.fm_file, pair.ut_file}) {
        std::string log;
        try {
            log = run_git(repo, "log --follow --format=%H -n " + std::to_string(max_depth) +
                                    " '" + head + "' -- '" + file + "'");
        } catch (const GitError& e) {
            std::cerr << "[testmend] history walk failed for " << file << ": " << e.what()
                      << "\n";
            continue;
        }
        for (const std::string& line : split_lines(log)) {
            const std::string commit = strip(line);
            if (!commit.empty() && seen.insert(commit).second) {
                commits.push_back(commit);
            }
        }
    }

    std::optional<MethodRecord> fm_head =
        method_at_revision(repo, head, pair.fm_file, pair.fm_qualified);
    std::optional<MethodRecord> ut_head =
        method_at_revision(repo, head, pair.ut_file, pair.ut_qualified);
    if (!fm_head || !ut_head) {
        throw GitError("pair not found at head revision");
    }

    std::vector<CommitPairRecord> records;
    std::set<std::string> dedupe;
    for (const std::string& commit : commits) {
        std::string parent;
        try {
            parent = strip(run_git(repo, "rev-parse '" + commit + "^'"));
        } catch (const GitError&) {
            continue;  // root commit
        }
        auto fm_old = method_at_revision(repo, parent, pair.fm_file, pair.fm_qualified);
        auto fm_post = method_at_revision(repo, commit, pair.fm_file, pair.fm_qualified);
        auto ut_old = method_at_revision(repo, parent, pair.ut_file, pair.ut_qualified);
        auto ut_post = method_at_revision(repo, commit, pair.ut_file, pair.ut_qualified);
        if (!fm_old || !fm_post || !ut_old || !ut_post) {
            continue;
        }
        // Commits where either method is structurally unchanged carry no
        // signal and are discarded.
        if (ast_equal(fm_old->source, fm_post->source) ||
            ast_equal(ut_old->source, ut_post->source)) {
            continue;
        }
        if (ast_equal(fm_old->source, fm_head->source) ||
            ast_equal(ut_old->source, ut_head->source)) {
            continue;
        }
        const std::string key = sha256_hex(fm_old->source + "\x1f" + ut_old->source);
        if (!dedupe.insert(key).second) {
            continue;
        }
        CommitPairRecord record;
        record.commit_old = parent;
        record.commit_new = head;
        record.fm_old = *fm_old;
        record.fm_new = *fm_head;
        record.ut_old = *ut_old;
        record.ut_new = *ut_head;
        records.push_back(std::move(record));
    }
    return records;
}

namespace {

fs::path clone_at(const fs::path& repo, const std::string& rev, const fs::path& sandbox_base) {
    const fs::path dest = make_unique_dir(sandbox_base, "git");
    CommandResult clone = run_command(
        "git clone --quiet '" + repo.string() + "' '" + dest.string() + "'",
        fs::current_path(), 120.0);
    if (clone.exit_code != 0) {
        throw GitError("clone failed: " + clone.output);
    }
    run_git(dest, "checkout --quiet '" + rev + "'");
    return dest;
}

} // namespace

std::string classify_transplant(CommitPairRecord& record,
                                const fs::path& repo,
                                const RunnerConfig& runner,
                                const fs::path& sandbox_base) {
    record.classification = "NoSignal";
    try {
        // Step 3 gate: the old test must pass at the old commit.
        {
            const fs::path old_root = clone_at(repo, record.commit_old, sandbox_base);
            ProjectSnapshot old_snapshot;
            old_snapshot.root = old_root;
            old_snapshot.runner = runner;
            old_snapshot.index = index_project(old_root, runner.test_file_glob);
            auto [outcome, report] = run_test_isolated(old_snapshot, test_node_id(record.ut_old));
            std::error_code ec;
            fs::remove_all(old_root, ec);
            if (outcome.kind != OutcomeKind::Pass) {
                return record.classification;
            }
        }

        const fs::path head_root = clone_at(repo, record.commit_new, sandbox_base);
        ProjectSnapshot head_snapshot;
        head_snapshot.root = head_root;
        head_snapshot.runner = runner;
        head_snapshot.sandbox_id = head_root.filename().string();
        head_snapshot.index = index_project(head_root, runner.test_file_glob);

        auto [head_outcome, head_report] =
            run_test_isolated(head_snapshot, test_node_id(record.ut_new));
        const MethodRecord* fm_here =
            head_snapshot.index.find(record.fm_new.file, record.fm_new.qualified_name);
        if (head_outcome.kind != OutcomeKind::Pass || fm_here == nullptr) {
            std::error_code ec;
            fs::remove_all(head_root, ec);
            return record.classification;
        }
        const double head_ratio = method_coverage(head_report, *fm_here).ratio;

        const MethodRecord* ut_here =
            head_snapshot.index.find(record.ut_new.file, record.ut_new.qualified_name);
        if (ut_here == nullptr) {
            std::error_code ec;
            fs::remove_all(head_root, ec);
            return record.classification;
        }
        ProjectSnapshot transplanted =
            replace_method(std::move(head_snapshot), *ut_here, record.ut_old.source);
        auto [outcome, report] = run_test_isolated(transplanted, test_node_id(record.ut_old));
        const MethodRecord* fm_after =
            transplanted.index.find(record.fm_new.file, record.fm_new.qualified_name);
        if (outcome.kind == OutcomeKind::AssertionFailure) {
            record.classification = "AssertionFailure";
        } else if (outcome.kind == OutcomeKind::Pass && fm_after != nullptr &&
                   method_coverage(report, *fm_after).ratio < head_ratio - 1e-9) {
            record.classification = "ReducedCoverage";
        }
        std::error_code ec;
        fs::remove_all(transplanted.root, ec);
    } catch (const std::exception& e) {
        std::cerr << "[testmend] transplant classification failed: " << e.what() << "\n";
        record.classification = "NoSignal";
    }
    return record.classification;
}

std::vector<CommitPairRecord> sample_cases(const std::vector<CommitPairRecord>& records,
                                           size_t n_af,
                                           size_t n_cc,
                                           uint64_t seed) {
    std::vector<const CommitPairRecord*> af;
    std::vector<const CommitPairRecord*> cc;
    for (const CommitPairRecord& record : records) {
        if (record.classification == "AssertionFailure") {
            af.push_back(&record);
        } else if (record.classification == "ReducedCoverage") {
            cc.push_back(&record);
        }
    }
    if (af.size() < n_af || cc.size() < n_cc) {
        throw InsufficientRecords("have " + std::to_string(af.size()) + " AF and " +
                                  std::to_string(cc.size()) + " CC records, need " +
                                  std::to_string(n_af) + "/" + std::to_string(n_cc));
    }

    // Hand-rolled Fisher-Yates so the draw is identical across platforms.
    uint64_t state = seed ^ 0x9e3779b97f4a7c15ULL;
    auto next = [&state]() {
        state ^= state >> 12;
        state ^= state << 25;
        state ^= state >> 27;
        return state * 0x2545f4914f6cdd1dULL;
    };
    auto draw = [&](std::vector<const CommitPairRecord*> pool, size_t n) {
        for (size_t i = pool.size(); i > 1; --i) {
            std::swap(pool[i - 1], pool[next() % i]);
        }
        pool.resize(n);
        return pool;
    };

    std::vector<CommitPairRecord> out;
    for (const CommitPairRecord* r : draw(af, n_af)) {
        out.push_back(*r);
    }
    for (const CommitPairRecord* r : draw(cc, n_cc)) {
        out.push_back(*r);
    }
    return out;
}

} // namespace testmend
