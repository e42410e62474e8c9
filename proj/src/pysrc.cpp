#include "testmend/pysrc.hpp"

#include "testmend/util.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace testmend {

namespace {

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

bool is_keyword(const std::string& word) {
    static const std::set<std::string> kKeywords = {
        "and",   "as",     "assert", "async",  "await",  "break",  "class", "continue",
        "def",   "del",    "elif",   "else",   "except", "finally", "for",  "from",
        "global", "if",    "import", "in",     "is",     "lambda", "nonlocal", "not",
        "or",    "pass",   "raise",  "return", "try",    "while",  "with",  "yield",
        "None",  "True",   "False"};
    return kKeywords.count(word) > 0;
}

int column_of(const std::string& line, size_t pos) {
    int col = 0;
    for (size_t i = 0; i < pos && i < line.size(); ++i) {
        if (line[i] == '\t') {
            col = (col / 8 + 1) * 8;
        } else {
            ++col;
        }
    }
    return col;
}

} // namespace

std::string MethodRecord::name() const {
    size_t dot = qualified_name.rfind('.');
    return dot == std::string::npos ? qualified_name : qualified_name.substr(dot + 1);
}

std::string CallSite::final_segment() const {
    size_t dot = callee_name.rfind('.');
    return dot == std::string::npos ? callee_name : callee_name.substr(dot + 1);
}

std::vector<PyLine> scan_python_lines(const std::string& source) {
    std::vector<std::string> raw = split_lines(source);
    std::vector<PyLine> lines;
    lines.reserve(raw.size());

    char string_quote = 0;     // 0 = not in string
    bool string_triple = false;
    bool string_raw = false;
    int depth = 0;
    bool backslash_cont = false;

    for (const std::string& text : raw) {
        PyLine info;
        info.text = text;
        info.masked.assign(text.size(), ' ');
        info.literal.assign(text.size(), ' ');
        const bool in_string_at_start = string_quote != 0;
        const bool cont_at_start = in_string_at_start || depth > 0 || backslash_cont;
        info.continuation = cont_at_start;
        backslash_cont = false;

        bool line_touches_string = in_string_at_start;
        size_t i = 0;
        bool in_comment = false;
        while (i < text.size()) {
            char c = text[i];
            if (string_quote != 0) {
                line_touches_string = true;
                if (c == '\\' && !string_raw && i + 1 < text.size()) {
                    info.literal[i] = text[i];
                    info.literal[i + 1] = text[i + 1];
                    i += 2;
                    continue;
                }
                if (c == string_quote) {
                    if (string_triple) {
                        if (i + 2 < text.size() && text[i + 1] == string_quote &&
                            text[i + 2] == string_quote) {
                            info.literal[i] = c;
                            info.literal[i + 1] = c;
                            info.literal[i + 2] = c;
                            string_quote = 0;
                            i += 3;
                            continue;
                        }
                    } else {
                        info.literal[i] = c;
                        string_quote = 0;
                        ++i;
                        continue;
                    }
                }
                // Sentinel for in-string spaces so literal runs stay intact.
                info.literal[i] = c == ' ' ? '\x01' : c;
                ++i;
                continue;
            }
            if (in_comment) {
                ++i;
                continue;
            }
            if (c == '#') {
                in_comment = true;
                ++i;
                continue;
            }
            if (c == '\'' || c == '"') {
                string_raw = false;
                size_t back = i;
                while (back > 0 && is_ident_char(text[back - 1])) {
                    char p = static_cast<char>(std::tolower(static_cast<unsigned char>(text[back - 1])));
                    if (p == 'r') {
                        string_raw = true;
                    }
                    --back;
                    if (i - back > 2) {
                        break;  // prefixes are at most 2 chars
                    }
                }
                string_quote = c;
                if (i + 2 < text.size() && text[i + 1] == c && text[i + 2] == c) {
                    string_triple = true;
                    info.literal[i] = c;
                    info.literal[i + 1] = c;
                    info.literal[i + 2] = c;
                    i += 3;
                } else {
                    string_triple = false;
                    info.literal[i] = c;
                    ++i;
                }
                line_touches_string = true;
                continue;
            }
            info.masked[i] = c;
            if (c == '(' || c == '[' || c == '{') {
                ++depth;
            } else if (c == ')' || c == ']' || c == '}') {
                --depth;
                if (depth < 0) {
                    throw ParseError("unbalanced closing bracket");
                }
            } else if (c == '\\' && i + 1 == text.size()) {
                backslash_cont = true;
                info.masked[i] = ' ';
            }
            ++i;
        }

        if (string_quote != 0 && !string_triple) {
            // Single-quoted strings cannot span a physical line.
            throw ParseError("unterminated string literal");
        }

        bool masked_code = false;
        for (char c : info.masked) {
            if (!std::isspace(static_cast<unsigned char>(c))) {
                masked_code = true;
                break;
            }
        }
        info.has_code = masked_code || line_touches_string;
        info.starts_logical = !cont_at_start && masked_code;
        if (info.starts_logical) {
            size_t first = info.masked.find_first_not_of(" \t");
            info.indent = column_of(text, first);
        }
        lines.push_back(std::move(info));
    }

    if (string_quote != 0) {
        throw ParseError("unterminated triple-quoted string");
    }
    if (depth != 0) {
        throw ParseError("unbalanced brackets at end of file");
    }
    return lines;
}

namespace {

struct Statement {
    int first_line = 0;  // 0-based indices into the line vector
    int last_line = 0;
    int indent = 0;
    std::string joined_masked;
};

std::vector<Statement> collect_statements(const std::vector<PyLine>& lines) {
    std::vector<Statement> stmts;
    size_t i = 0;
    while (i < lines.size()) {
        if (!lines[i].starts_logical) {
            ++i;
            continue;
        }
        Statement st;
        st.first_line = static_cast<int>(i);
        st.indent = lines[i].indent;
        st.joined_masked = lines[i].masked;
        size_t j = i + 1;
        while (j < lines.size() && lines[j].continuation) {
            st.joined_masked += "\n" + lines[j].masked;
            ++j;
        }
        st.last_line = static_cast<int>(j - 1);
        stmts.push_back(std::move(st));
        i = j;
    }
    return stmts;
}

// Reads an identifier from masked text at pos, skipping leading whitespace.
std::string read_ident(const std::string& s, size_t& pos) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) {
        ++pos;
    }
    size_t start = pos;
    if (pos < s.size() && is_ident_start(s[pos])) {
        ++pos;
        while (pos < s.size() && is_ident_char(s[pos])) {
            ++pos;
        }
    }
    return s.substr(start, pos - start);
}

struct HeaderInfo {
    enum Kind { None, Def, Class, Decorator } kind = None;
    std::string name;
};

HeaderInfo parse_header(const std::string& joined_masked) {
    HeaderInfo info;
    size_t pos = 0;
    std::string word = read_ident(joined_masked, pos);
    if (word.empty()) {
        size_t at = joined_masked.find_first_not_of(" \t\n");
        if (at != std::string::npos && joined_masked[at] == '@') {
            info.kind = HeaderInfo::Decorator;
            pos = at + 1;
            std::string chain = read_ident(joined_masked, pos);
            while (pos < joined_masked.size() && joined_masked[pos] == '.') {
                ++pos;
                chain += "." + read_ident(joined_masked, pos);
            }
            info.name = chain;
        }
        return info;
    }
    if (word == "async") {
        word = read_ident(joined_masked, pos);
    }
    if (word == "def") {
        info.kind = HeaderInfo::Def;
        info.name = read_ident(joined_masked, pos);
        if (info.name.empty()) {
            throw ParseError("def without a name");
        }
    } else if (word == "class") {
        info.kind = HeaderInfo::Class;
        info.name = read_ident(joined_masked, pos);
    }
    return info;
}

struct Scope {
    bool is_def = false;
    std::string name;
    int indent = 0;
    int record_index = -1;  // for defs
};

} // namespace

std::vector<MethodRecord> extract_methods(const std::string& file_source,
                                          const std::string& file_path,
                                          const std::string& test_file_glob) {
    const std::vector<PyLine> lines = scan_python_lines(file_source);
    const std::vector<Statement> stmts = collect_statements(lines);

    std::vector<MethodRecord> records;
    std::vector<Scope> scopes;
    struct Pending {
        int first_line;
        int indent;
        std::string name;
    };
    std::vector<Pending> pending_decorators;

    struct OpenEnd {
        int record_index;
        int end_line;  // 0-based, last statement line seen inside this def
    };
    std::vector<OpenEnd> open_defs;

    const bool glob_hit = glob_match(test_file_glob, file_path);

    auto close_scope = [&]() {
        if (scopes.back().is_def) {
            records[open_defs.back().record_index].span.end = open_defs.back().end_line + 1;
            open_defs.pop_back();
        }
        scopes.pop_back();
    };

    for (const Statement& st : stmts) {
        while (!scopes.empty() && st.indent <= scopes.back().indent) {
            close_scope();
        }
        // Every enclosing def's body now extends through this statement.
        for (OpenEnd& open : open_defs) {
            open.end_line = st.last_line;
        }

        HeaderInfo header = parse_header(st.joined_masked);
        if (header.kind == HeaderInfo::Decorator) {
            if (!pending_decorators.empty() && pending_decorators.front().indent != st.indent) {
                pending_decorators.clear();
            }
            pending_decorators.push_back({st.first_line, st.indent, header.name});
            continue;
        }

        int span_first = st.first_line;
        std::vector<std::string> decorators;
        if (!pending_decorators.empty() && pending_decorators.front().indent == st.indent &&
            (header.kind == HeaderInfo::Def || header.kind == HeaderInfo::Class)) {
            span_first = pending_decorators.front().first_line;
            for (const Pending& p : pending_decorators) {
                decorators.push_back(p.name);
            }
        }
        pending_decorators.clear();

        if (header.kind == HeaderInfo::Def) {
            MethodRecord rec;
            std::string prefix;
            for (const Scope& s : scopes) {
                prefix += s.name + ".";
            }
            rec.qualified_name = prefix + header.name;
            rec.file = file_path;
            rec.span.start = span_first + 1;
            rec.span.end = st.last_line + 1;
            rec.decorators = std::move(decorators);
            rec.is_test = header.name.rfind("test", 0) == 0 || glob_hit;
            records.push_back(std::move(rec));
            scopes.push_back({true, header.name, st.indent,
                              static_cast<int>(records.size()) - 1});
            open_defs.push_back({static_cast<int>(records.size()) - 1, st.last_line});
        } else if (header.kind == HeaderInfo::Class) {
            scopes.push_back({false, header.name, st.indent, -1});
        }
    }
    while (!scopes.empty()) {
        close_scope();
    }

    const std::vector<std::string> raw = split_lines(file_source);
    for (MethodRecord& rec : records) {
        std::vector<std::string> body(raw.begin() + rec.span.start - 1,
                                      raw.begin() + rec.span.end);
        rec.source = join_lines(body);
    }
    return records;
}

std::vector<CallSite> extract_call_sites(const MethodRecord& method,
                                         const std::string& /*file_source*/) {
    const std::vector<PyLine> lines = scan_python_lines(method.source);
    std::vector<CallSite> sites;

    for (size_t li = 0; li < lines.size(); ++li) {
        const std::string& m = lines[li].masked;
        size_t i = 0;
        while (i < m.size()) {
            if (!is_ident_start(m[i]) || (i > 0 && (is_ident_char(m[i - 1]) || m[i - 1] == '.'))) {
                ++i;
                continue;
            }
            // Read a dotted identifier chain.
            size_t chain_start = i;
            std::string chain;
            size_t j = i;
            while (true) {
                size_t seg_start = j;
                while (j < m.size() && is_ident_char(m[j])) {
                    ++j;
                }
                chain += m.substr(seg_start, j - seg_start);
                size_t k = j;
                while (k < m.size() && (m[k] == ' ' || m[k] == '\t')) {
                    ++k;
                }
                if (k < m.size() && m[k] == '.' ) {
                    size_t n = k + 1;
                    while (n < m.size() && (m[n] == ' ' || m[n] == '\t')) {
                        ++n;
                    }
                    if (n < m.size() && is_ident_start(m[n])) {
                        chain += ".";
                        j = n;
                        continue;
                    }
                }
                break;
            }
            size_t after = j;
            while (after < m.size() && (m[after] == ' ' || m[after] == '\t')) {
                ++after;
            }
            bool is_call = after < m.size() && m[after] == '(';
            if (is_call) {
                bool skip = false;
                if (chain.find('.') == std::string::npos && is_keyword(chain)) {
                    skip = true;
                }
                // The declared name in "def f(" / "class K(" is not a call.
                size_t back = chain_start;
                while (back > 0 && (m[back - 1] == ' ' || m[back - 1] == '\t')) {
                    --back;
                }
                size_t kw_end = back;
                while (back > 0 && is_ident_char(m[back - 1])) {
                    --back;
                }
                std::string prev_word = m.substr(back, kw_end - back);
                if (prev_word == "def" || prev_word == "class") {
                    skip = true;
                }
                if (!skip) {
                    CallSite site;
                    site.callee_name = chain;
                    site.line = method.span.start + static_cast<int>(li);
                    sites.push_back(std::move(site));
                }
            }
            i = j;
        }
    }
    return sites;
}

std::vector<std::string> tokenize_fragments(const std::string& name) {
    std::string segment = name;
    size_t dot = segment.rfind('.');
    if (dot != std::string::npos) {
        segment = segment.substr(dot + 1);
    }

    std::vector<std::string> pieces;
    std::string current;
    for (char c : segment) {
        if (c == '_' || c == '-') {
            if (!current.empty()) {
                pieces.push_back(current);
                current.clear();
            }
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) {
        pieces.push_back(current);
    }

    std::vector<std::string> fragments;
    for (const std::string& piece : pieces) {
        size_t start = 0;
        for (size_t i = 1; i < piece.size(); ++i) {
            char prev = piece[i - 1];
            char cur = piece[i];
            bool lower_to_upper = !std::isupper(static_cast<unsigned char>(prev)) &&
                                  std::isupper(static_cast<unsigned char>(cur));
            bool acronym_end = std::isupper(static_cast<unsigned char>(prev)) &&
                               std::isupper(static_cast<unsigned char>(cur)) &&
                               i + 1 < piece.size() &&
                               std::islower(static_cast<unsigned char>(piece[i + 1]));
            if (lower_to_upper || acronym_end) {
                if (i > start) {
                    fragments.push_back(to_lower(piece.substr(start, i - start)));
                }
                start = i;
            }
        }
        if (start < piece.size()) {
            fragments.push_back(to_lower(piece.substr(start)));
        }
    }
    return fragments;
}

TokenSet tokenize_identifier(const std::string& name) {
    TokenSet result;
    for (std::string& frag : tokenize_fragments(name)) {
        if (!frag.empty()) {
            result.tokens.insert(std::move(frag));
        }
    }
    return result;
}

bool parses_as_single_function(const std::string& source) {
    std::vector<PyLine> lines;
    std::vector<MethodRecord> records;
    try {
        lines = scan_python_lines(source);
        records = extract_methods(source, "<candidate>");
    } catch (const ParseError&) {
        return false;
    }
    const MethodRecord* top = nullptr;
    for (const MethodRecord& rec : records) {
        if (rec.qualified_name.find('.') == std::string::npos) {
            if (top != nullptr) {
                return false;
            }
            top = &rec;
        }
    }
    if (top == nullptr) {
        return false;
    }
    for (size_t i = 0; i < lines.size(); ++i) {
        if (!lines[i].has_code) {
            continue;
        }
        int lineno = static_cast<int>(i) + 1;
        if (lineno < top->span.start || lineno > top->span.end) {
            return false;
        }
    }
    return true;
}

int method_body_start(const MethodRecord& method) {
    std::vector<PyLine> lines;
    try {
        lines = scan_python_lines(method.source);
    } catch (const ParseError&) {
        return method.span.end + 1;
    }
    const std::vector<Statement> stmts = collect_statements(lines);
    for (const Statement& st : stmts) {
        HeaderInfo header;
        try {
            header = parse_header(st.joined_masked);
        } catch (const ParseError&) {
            continue;
        }
        if (header.kind == HeaderInfo::Def) {
            return method.span.start + st.last_line + 1;
        }
    }
    return method.span.end + 1;
}

std::string dedent(const std::string& text) {
    std::vector<std::string> lines = split_lines(text);
    size_t common = std::string::npos;
    for (const std::string& line : lines) {
        size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos) {
            continue;
        }
        common = std::min(common, first);
    }
    if (common == std::string::npos || common == 0) {
        return text;
    }
    for (std::string& line : lines) {
        if (line.size() >= common) {
            line.erase(0, common);
        } else {
            line.clear();
        }
    }
    return join_lines(lines);
}

} // namespace testmend
