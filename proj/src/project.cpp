#include "testmend/project.hpp"

#include "testmend/util.hpp"

#include <algorithm>
#include <iostream>
#include <regex>

namespace testmend {

const MethodRecord* MethodIndex::find(const std::string& file,
                                      const std::string& qualified_name) const {
    auto it = by_file.find(file);
    if (it == by_file.end()) {
        return nullptr;
    }
    for (const MethodRecord& rec : it->second) {
        if (rec.qualified_name == qualified_name) {
            return &rec;
        }
    }
    return nullptr;
}

const MethodRecord* MethodIndex::find_qualified(const std::string& qualified_name) const {
    for (const auto& [file, records] : by_file) {
        for (const MethodRecord& rec : records) {
            if (rec.qualified_name == qualified_name) {
                return &rec;
            }
        }
    }
    return nullptr;
}

std::vector<const MethodRecord*> MethodIndex::resolve_name(const std::string& name) const {
    // Constructor calls `Name(...)` resolve to Name.__init__.
    const std::string ctor_suffix = name + ".__init__";
    std::vector<const MethodRecord*> out;
    for (const auto& [file, records] : by_file) {
        for (const MethodRecord& rec : records) {
            if (rec.is_test) {
                continue;
            }
            const bool direct = rec.name() == name;
            const bool ctor = rec.qualified_name == ctor_suffix ||
                              (rec.qualified_name.size() > ctor_suffix.size() + 1 &&
                               rec.qualified_name.rfind("." + ctor_suffix) ==
                                   rec.qualified_name.size() - ctor_suffix.size() - 1);
            if (direct || ctor) {
                out.push_back(&rec);
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const MethodRecord* a, const MethodRecord* b) {
        return a->qualified_name < b->qualified_name;
    });
    return out;
}

std::vector<const MethodRecord*> MethodIndex::all_tests() const {
    std::vector<const MethodRecord*> out;
    for (const auto& [file, records] : by_file) {
        for (const MethodRecord& rec : records) {
            if (rec.is_test) {
                out.push_back(&rec);
            }
        }
    }
    return out;
}

size_t MethodIndex::method_count() const {
    size_t n = 0;
    for (const auto& [file, records] : by_file) {
        n += records.size();
    }
    return n;
}

MethodIndex index_project(const fs::path& root, const std::string& test_file_glob) {
    MethodIndex index;
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".py") {
            continue;
        }
        const std::string rel = fs::relative(entry.path(), root).generic_string();
        if (rel.find("__pycache__") != std::string::npos ||
            rel.find(".testmend") != std::string::npos) {
            continue;
        }
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& path : files) {
        const std::string rel = fs::relative(path, root).generic_string();
        try {
            index.by_file[rel] = extract_methods(read_file(path), rel, test_file_glob);
        } catch (const ParseError& e) {
            std::cerr << "[testmend] skipping unparseable file " << rel << ": " << e.what()
                      << "\n";
        }
    }
    return index;
}

ProjectSnapshot materialize_sandbox(const fs::path& original_root,
                                    const RunnerConfig& runner,
                                    const fs::path& sandbox_base) {
    runner.validate();
    fs::path dest = make_unique_dir(sandbox_base, "sbx");
    copy_tree(original_root, dest);
    ProjectSnapshot snapshot;
    snapshot.root = dest;
    snapshot.runner = runner;
    snapshot.sandbox_id = dest.filename().string();
    snapshot.index = index_project(dest, runner.test_file_glob);
    return snapshot;
}

std::string reindent_to(const std::string& source, int target_indent) {
    std::vector<std::string> lines = split_lines(source);
    int base = -1;
    for (const std::string& line : lines) {
        size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos) {
            continue;
        }
        base = static_cast<int>(first);
        break;
    }
    if (base < 0) {
        base = 0;
    }
    const std::string pad(static_cast<size_t>(target_indent), ' ');
    for (std::string& line : lines) {
        size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos) {
            line.clear();
            continue;
        }
        int extra = static_cast<int>(first) - base;
        if (extra < 0) {
            extra = 0;
        }
        line = pad + std::string(static_cast<size_t>(extra), ' ') + line.substr(first);
    }
    return join_lines(lines);
}

ProjectSnapshot replace_method(ProjectSnapshot snapshot,
                               const MethodRecord& target,
                               const std::string& new_source) {
    if (!parses_as_single_function(dedent(new_source))) {
        throw ParseError("replacement source is not a single function definition");
    }
    const fs::path file_path = snapshot.root / target.file;
    if (!fs::exists(file_path)) {
        throw SpanDrift("file missing from sandbox: " + target.file);
    }
    FileLines file = split_file_lines(read_file(file_path));
    if (target.span.start < 1 || static_cast<size_t>(target.span.end) > file.lines.size()) {
        throw SpanDrift("span out of range for " + target.qualified_name);
    }
    std::vector<std::string> current(file.lines.begin() + target.span.start - 1,
                                     file.lines.begin() + target.span.end);
    if (join_lines(current) != target.source) {
        throw SpanDrift("file changed since extraction: " + target.qualified_name);
    }

    const std::string& first_line = file.lines[static_cast<size_t>(target.span.start) - 1];
    const int target_indent = static_cast<int>(first_line.find_first_not_of(" \t"));
    const std::string replacement = reindent_to(new_source, std::max(target_indent, 0));
    const std::vector<std::string> repl_lines = split_lines(replacement);

    std::vector<std::string> updated;
    updated.reserve(file.lines.size());
    updated.insert(updated.end(), file.lines.begin(), file.lines.begin() + target.span.start - 1);
    updated.insert(updated.end(), repl_lines.begin(), repl_lines.end());
    updated.insert(updated.end(), file.lines.begin() + target.span.end, file.lines.end());

    FileLines out;
    out.lines = std::move(updated);
    out.ends_with_newline = file.ends_with_newline;
    write_file(file_path, out.join());

    snapshot.index.by_file[target.file] =
        extract_methods(read_file(file_path), target.file, snapshot.runner.test_file_glob);
    return snapshot;
}

TestRecord anonymize_test_name(ProjectSnapshot& snapshot,
                               const TestRecord& test,
                               std::mt19937_64& rng) {
    std::string fresh;
    for (int attempt = 0; attempt < 256; ++attempt) {
        std::string candidate = "test_";
        for (int i = 0; i < 8; ++i) {
            candidate.push_back(static_cast<char>('a' + rng() % 26));
        }
        bool collides = false;
        for (const auto& [file, records] : snapshot.index.by_file) {
            for (const MethodRecord& rec : records) {
                if (rec.name() == candidate || rec.qualified_name == candidate) {
                    collides = true;
                    break;
                }
            }
            if (collides) {
                break;
            }
        }
        if (!collides) {
            fresh = candidate;
            break;
        }
    }
    if (fresh.empty()) {
        throw std::runtime_error("could not find a collision-free test name");
    }

    const fs::path file_path = snapshot.root / test.file;
    const std::string original = read_file(file_path);
    const std::regex word(std::string("\\b") + test.name() + "\\b");
    const std::string rewritten = std::regex_replace(original, word, fresh);
    write_file(file_path, rewritten);
    snapshot.index.by_file[test.file] =
        extract_methods(rewritten, test.file, snapshot.runner.test_file_glob);

    std::string new_qualified = test.qualified_name;
    size_t dot = new_qualified.rfind('.');
    new_qualified = dot == std::string::npos ? fresh : new_qualified.substr(0, dot + 1) + fresh;
    const MethodRecord* updated = snapshot.index.find(test.file, new_qualified);
    if (updated == nullptr) {
        throw std::runtime_error("anonymized test not found after rewrite");
    }
    return *updated;
}

void resolve_call_sites(std::vector<CallSite>& sites, const MethodIndex& index) {
    for (CallSite& site : sites) {
        std::vector<const MethodRecord*> matches = index.resolve_name(site.final_segment());
        if (!matches.empty()) {
            site.resolved = matches.front()->qualified_name;
        }
    }
}

} // namespace testmend
