#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace testmend {

class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// 1-based, inclusive on both ends.
struct LineSpan {
    int start = 0;
    int end = 0;
};

struct MethodRecord {
    std::string qualified_name;
    std::string file;                     // path relative to the project root
    LineSpan span;                        // decorators through last body line
    std::string source;                   // verbatim span text, '\n'-joined, no trailing newline
    bool is_test = false;
    std::vector<std::string> decorators;

    std::string name() const;             // final segment of qualified_name
};

using TestRecord = MethodRecord;

struct CallSite {
    std::string callee_name;              // dotted form as written, e.g. "api.bases"
    std::optional<std::string> resolved;  // qualified name within the project
    int line = 0;

    std::string final_segment() const;
};

struct TokenSet {
    std::set<std::string> tokens;

    bool operator==(const TokenSet&) const = default;
};

// Low-level scan result for one physical line of Python source.
struct PyLine {
    std::string text;
    std::string masked;            // same length; string/comment bytes blanked
    std::string literal;           // same length; only string-literal bytes kept
    bool starts_logical = false;   // begins a logical statement
    bool continuation = false;     // inside a string/bracket/backslash continuation
    bool has_code = false;         // carries code or string-literal content
    int indent = -1;               // column of first char when starts_logical
};

std::vector<PyLine> scan_python_lines(const std::string& source);

std::vector<MethodRecord> extract_methods(const std::string& file_source,
                                          const std::string& file_path,
                                          const std::string& test_file_glob = "");

std::vector<CallSite> extract_call_sites(const MethodRecord& method,
                                         const std::string& file_source);

TokenSet tokenize_identifier(const std::string& name);

// Ordered camel/underscore/dash fragments of the final dotted segment,
// lowercased. tokenize_identifier is the set of these.
std::vector<std::string> tokenize_fragments(const std::string& name);

// True when the text scans cleanly and consists of exactly one top-level
// function definition (decorators allowed, nested defs allowed).
bool parses_as_single_function(const std::string& source);

// First line of the method's body, i.e. the line after the def statement's
// header (decorators and multiline signatures skipped). Lines from here on
// only execute when the method is invoked, unlike the header, which runs at
// import time. Returns span.end + 1 for one-line defs.
int method_body_start(const MethodRecord& method);

std::string dedent(const std::string& text);

} // namespace testmend
