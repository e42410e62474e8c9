#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace testmend {

namespace fs = std::filesystem;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view content);

// Splits on '\n'. "a\nb\n" -> {"a","b"} with ends_with_newline=true,
// "a\nb" -> {"a","b"} with ends_with_newline=false.
struct FileLines {
    std::vector<std::string> lines;
    bool ends_with_newline = false;

    std::string join() const;
};
FileLines split_file_lines(std::string_view text);

std::vector<std::string> split_lines(std::string_view text);
std::string join_lines(const std::vector<std::string>& lines);

std::string strip(std::string_view s);
std::string lstrip(std::string_view s);
std::string to_lower(std::string_view s);
bool contains(std::string_view haystack, std::string_view needle);
std::string replace_all(std::string s, std::string_view from, std::string_view to);

// Collapses every whitespace run to a single space and trims the ends.
std::string squeeze_whitespace(std::string_view s);

// fnmatch-style glob with '*' and '?'. Patterns containing '/' match the
// whole (relative) path, others match the basename.
bool glob_match(std::string_view pattern, std::string_view path);

std::string sha256_hex(std::string_view data);

// Recursive copy skipping __pycache__, .pytest_cache, .git and .testmend.
void copy_tree(const fs::path& from, const fs::path& to);

// Creates a fresh unique directory under `base`.
fs::path make_unique_dir(const fs::path& base, std::string_view prefix);

std::string format_double(double v);

} // namespace testmend
