#include "testmend/slicing.hpp"

#include "testmend/util.hpp"

#include <algorithm>
#include <iostream>
#include <map>
#include <sstream>

namespace testmend {

bool occurs_verbatim(const std::string& snippet, const std::string& file_source) {
    const std::string needle = squeeze_whitespace(snippet);
    if (needle.empty()) {
        return false;
    }
    return contains(squeeze_whitespace(file_source), needle);
}

std::vector<std::string> parse_context_blocks(const std::string& text) {
    std::vector<std::string> blocks;
    for (int k = 1;; ++k) {
        const std::string open = "<context-" + std::to_string(k) + ">";
        const std::string close = "</context-" + std::to_string(k) + ">";
        size_t open_pos = text.find(open);
        if (open_pos == std::string::npos) {
            break;
        }
        const std::string next_open = "<context-" + std::to_string(k + 1) + ">";
        const size_t limit = text.find(next_open, open_pos);
        // Last close before the next block keeps stray tags inside code
        // strings from cutting the block short.
        size_t close_pos = std::string::npos;
        size_t search = open_pos + open.size();
        while (true) {
            size_t hit = text.find(close, search);
            if (hit == std::string::npos || (limit != std::string::npos && hit > limit)) {
                break;
            }
            close_pos = hit;
            search = hit + close.size();
        }
        if (close_pos == std::string::npos) {
            return {};  // unmatched tags yield zero blocks
        }
        const size_t body_start = open_pos + open.size();
        std::string body = text.substr(body_start, close_pos - body_start);
        // Trim a single leading/trailing newline produced by tag layout.
        if (!body.empty() && body.front() == '\n') {
            body.erase(body.begin());
        }
        while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) {
            body.pop_back();
        }
        blocks.push_back(std::move(body));
    }
    return blocks;
}

std::string static_slice_prompt(const MethodRecord& fm1, const std::string& focal_file_source) {
    std::string prompt;
    prompt += "Below is a changed focal method and the full source of the file it lives in.\n";
    prompt += "Select the code slices from this file that are most relevant to the focal\n";
    prompt += "method's call and return behavior. Reply with each slice wrapped in numbered\n";
    prompt += "tags: <context-1>...</context-1>, <context-2>...</context-2>, and so on.\n";
    prompt += "Copy the code exactly as it appears in the file.\n";
    prompt += "\n<focal_method>\n" + fm1.source + "\n</focal_method>\n";
    prompt += "\n<focal_file>\n" + focal_file_source + "\n</focal_file>\n";
    return prompt;
}

StaticSlice static_slice(const MethodRecord& fm1,
                         const std::string& focal_file_source,
                         ChatBackend& backend,
                         const GenParams& params) {
    const std::string prompt = static_slice_prompt(fm1, focal_file_source);
    StaticSlice slice;
    for (int attempt = 0; attempt < 3; ++attempt) {
        ChatHistory history{{"user", prompt}};
        const std::string reply = backend.complete(history, params);
        std::vector<std::string> blocks = parse_context_blocks(reply);
        if (blocks.empty()) {
            std::cerr << "[testmend] static slice reply had no context blocks (attempt "
                      << attempt + 1 << ")\n";
            continue;
        }
        for (std::string& block : blocks) {
            if (block.empty()) {
                continue;
            }
            if (occurs_verbatim(block, focal_file_source)) {
                slice.contexts.push_back(std::move(block));
            } else {
                std::cerr << "[testmend] dropping fabricated static-slice snippet for "
                          << fm1.qualified_name << "\n";
            }
        }
        return slice;
    }
    return slice;  // degrade to no slice
}

DynamicSlice dynamic_slice(const MethodRecord& fm1,
                           const CoverageReport& report,
                           const std::vector<CallSite>& call_sites,
                           const MethodIndex& index) {
    // FM1 first, then resolved callees with at least one covered line.
    std::vector<const MethodRecord*> members;
    members.push_back(&fm1);
    std::vector<std::string> seen{fm1.qualified_name};
    for (const CallSite& site : call_sites) {
        if (!site.resolved) {
            continue;
        }
        if (std::find(seen.begin(), seen.end(), *site.resolved) != seen.end()) {
            continue;
        }
        const MethodRecord* callee = index.find_qualified(*site.resolved);
        if (callee == nullptr) {
            continue;
        }
        seen.push_back(*site.resolved);
        members.push_back(callee);
    }

    std::map<std::string, std::vector<DynamicSliceMethod>> grouped;
    std::map<std::string, std::vector<int>> span_starts;
    for (const MethodRecord* method : members) {
        const FileCoverage* fc = report.find(method->file);
        if (fc == nullptr) {
            continue;
        }
        // Inclusion requires an executed body line; header lines run at
        // import time and say nothing about the call.
        int body_start = method_body_start(*method);
        if (body_start > method->span.end) {
            body_start = method->span.start;  // one-line def
        }
        bool body_covered = false;
        for (int line = body_start; line <= method->span.end && !body_covered; ++line) {
            body_covered = fc->covered_lines.count(line) > 0;
        }
        if (!body_covered) {
            continue;
        }
        DynamicSliceMethod entry;
        entry.qualified_name = method->qualified_name;
        const std::vector<std::string> source_lines = split_lines(method->source);
        for (int line = method->span.start; line <= method->span.end; ++line) {
            if (fc->covered_lines.count(line) == 0) {
                continue;
            }
            const size_t idx = static_cast<size_t>(line - method->span.start);
            entry.lines.emplace_back(line, idx < source_lines.size() ? source_lines[idx] : "");
        }
        if (entry.lines.empty()) {
            continue;
        }
        grouped[method->file].push_back(std::move(entry));
        span_starts[method->file].push_back(method->span.start);
    }

    DynamicSlice slice;
    for (auto& [file, methods] : grouped) {
        // Deterministic ordering: file path, then span start.
        std::vector<size_t> order(methods.size());
        for (size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return span_starts[file][a] < span_starts[file][b];
        });
        DynamicSliceFile out;
        out.file = file;
        for (size_t i : order) {
            out.methods.push_back(std::move(methods[i]));
        }
        slice.files.push_back(std::move(out));
    }
    return slice;
}

std::string render_dynamic_slice(const DynamicSlice& slice) {
    if (slice.empty()) {
        return "";
    }
    std::ostringstream out;
    bool first_file = true;
    for (const DynamicSliceFile& file : slice.files) {
        if (!first_file) {
            out << "\n";
        }
        first_file = false;
        out << "<filename name=\"" << file.file << "\">\n";
        for (const DynamicSliceMethod& method : file.methods) {
            out << "  <method name=\"" << method.qualified_name << "\">\n";
            out << "    <method_body>\n";
            // Dedent the kept lines as a block so relative indentation within
            // the method survives.
            std::vector<std::string> texts;
            for (const auto& [line, text] : method.lines) {
                texts.push_back(text);
            }
            const std::vector<std::string> dedented = split_lines(dedent(join_lines(texts)));
            int prev_line = -1;
            for (size_t i = 0; i < method.lines.size(); ++i) {
                const int line = method.lines[i].first;
                if (prev_line >= 0 && line - prev_line >= 2) {
                    out << "      ...\n";
                }
                out << "      " << (i < dedented.size() ? dedented[i] : "") << "\n";
                prev_line = line;
            }
            out << "    </method_body>\n";
            out << "  </method>\n";
        }
        out << "</filename>";
    }
    return out.str();
}

namespace {

std::string attr_value(const std::string& line, const std::string& tag) {
    const std::string prefix = "<" + tag + " name=\"";
    size_t at = line.find(prefix);
    if (at == std::string::npos) {
        return "";
    }
    size_t start = at + prefix.size();
    size_t end = line.find('"', start);
    if (end == std::string::npos) {
        return "";
    }
    return line.substr(start, end - start);
}

} // namespace

DynamicSlice parse_dynamic_slice(const std::string& text) {
    DynamicSlice slice;
    DynamicSliceFile* file = nullptr;
    DynamicSliceMethod* method = nullptr;
    bool in_body = false;
    for (const std::string& raw : split_lines(text)) {
        const std::string line = strip(raw);
        if (line.rfind("<filename", 0) == 0) {
            slice.files.push_back({attr_value(line, "filename"), {}});
            file = &slice.files.back();
        } else if (line.rfind("<method ", 0) == 0 && file != nullptr) {
            file->methods.push_back({attr_value(line, "method"), {}});
            method = &file->methods.back();
        } else if (line == "<method_body>") {
            in_body = true;
        } else if (line == "</method_body>") {
            in_body = false;
        } else if (line == "</method>") {
            method = nullptr;
        } else if (line == "</filename>") {
            file = nullptr;
        } else if (in_body && method != nullptr && line != "...") {
            method->lines.emplace_back(0, line);
        }
    }
    return slice;
}

} // namespace testmend
