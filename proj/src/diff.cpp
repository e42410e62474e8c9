#include "testmend/diff.hpp"

#include "testmend/util.hpp"

#include <sstream>
#include <stdexcept>
#include <vector>

namespace testmend {

namespace {

// Longest-common-subsequence table; method bodies are small so the
// quadratic table is fine.
std::vector<std::pair<char, std::string>> diff_lines(const std::vector<std::string>& a,
                                                     const std::vector<std::string>& b) {
    const size_t n = a.size();
    const size_t m = b.size();
    std::vector<std::vector<int>> lcs(n + 1, std::vector<int>(m + 1, 0));
    for (size_t i = n; i-- > 0;) {
        for (size_t j = m; j-- > 0;) {
            if (a[i] == b[j]) {
                lcs[i][j] = lcs[i + 1][j + 1] + 1;
            } else {
                lcs[i][j] = std::max(lcs[i + 1][j], lcs[i][j + 1]);
            }
        }
    }
    std::vector<std::pair<char, std::string>> ops;
    size_t i = 0;
    size_t j = 0;
    while (i < n && j < m) {
        if (a[i] == b[j]) {
            ops.emplace_back(' ', a[i]);
            ++i;
            ++j;
        } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
            ops.emplace_back('-', a[i]);
            ++i;
        } else {
            ops.emplace_back('+', b[j]);
            ++j;
        }
    }
    for (; i < n; ++i) {
        ops.emplace_back('-', a[i]);
    }
    for (; j < m; ++j) {
        ops.emplace_back('+', b[j]);
    }
    return ops;
}

} // namespace

MethodDiff compute_method_diff(const MethodRecord& old_method,
                               const MethodRecord& new_method) {
    const std::vector<std::string> old_lines = split_lines(old_method.source);
    const std::vector<std::string> new_lines = split_lines(new_method.source);

    std::ostringstream out;
    out << "--- a/" << old_method.file << "\n";
    out << "+++ b/" << new_method.file << "\n";
    out << "@@ -" << old_method.span.start << "," << old_lines.size() << " +"
        << new_method.span.start << "," << new_lines.size() << " @@\n";
    for (const auto& [op, line] : diff_lines(old_lines, new_lines)) {
        out << op << line << "\n";
    }

    MethodDiff diff;
    diff.old_method = old_method;
    diff.new_method = new_method;
    diff.unified = out.str();
    if (!diff.unified.empty()) {
        diff.unified.pop_back();  // keep the text '\n'-joined like method sources
    }
    return diff;
}

std::string apply_unified(const std::string& unified, const std::string& old_source) {
    const std::vector<std::string> old_lines = split_lines(old_source);
    std::vector<std::string> new_lines;
    size_t cursor = 0;
    bool in_hunk = false;
    for (const std::string& line : split_lines(unified)) {
        if (line.rfind("--- ", 0) == 0 || line.rfind("+++ ", 0) == 0) {
            continue;
        }
        if (line.rfind("@@", 0) == 0) {
            in_hunk = true;
            continue;
        }
        if (!in_hunk) {
            continue;
        }
        if (line.empty()) {
            throw std::runtime_error("malformed diff body line");
        }
        const char op = line[0];
        const std::string content = line.substr(1);
        switch (op) {
        case ' ':
            if (cursor >= old_lines.size() || old_lines[cursor] != content) {
                throw std::runtime_error("context mismatch while applying diff");
            }
            new_lines.push_back(old_lines[cursor++]);
            break;
        case '-':
            if (cursor >= old_lines.size() || old_lines[cursor] != content) {
                throw std::runtime_error("deletion mismatch while applying diff");
            }
            ++cursor;
            break;
        case '+':
            new_lines.push_back(content);
            break;
        default:
            throw std::runtime_error("unknown diff op");
        }
    }
    if (cursor != old_lines.size()) {
        throw std::runtime_error("diff did not consume the whole old source");
    }
    return join_lines(new_lines);
}

int count_change_lines(const std::string& unified) {
    int count = 0;
    bool in_hunk = false;
    for (const std::string& line : split_lines(unified)) {
        if (line.rfind("@@", 0) == 0) {
            in_hunk = true;
            continue;
        }
        if (in_hunk && !line.empty() && (line[0] == '-' || line[0] == '+')) {
            ++count;
        }
    }
    return count;
}

} // namespace testmend
