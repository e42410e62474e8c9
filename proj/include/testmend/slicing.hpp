#pragma once

#include "testmend/gateway.hpp"
#include "testmend/project.hpp"
#include "testmend/pysrc.hpp"
#include "testmend/runner.hpp"

#include <string>
#include <vector>

namespace testmend {

struct StaticSlice {
    std::vector<std::string> contexts;  // snippets, each verbatim in the focal file
};

struct DynamicSliceMethod {
    std::string qualified_name;
    std::vector<std::pair<int, std::string>> lines;  // covered lines, file order
};

struct DynamicSliceFile {
    std::string file;
    std::vector<DynamicSliceMethod> methods;  // ordered by span start
};

struct DynamicSlice {
    std::vector<DynamicSliceFile> files;  // ordered by path

    bool empty() const { return files.empty(); }
};

// Whitespace-normalized substring check used to keep slices honest.
bool occurs_verbatim(const std::string& snippet, const std::string& file_source);

std::vector<std::string> parse_context_blocks(const std::string& text);

// Prompts the backend with FM1 and the focal file, keeps snippets that pass
// the verbatim check. Two retries on malformed replies, then an empty slice.
StaticSlice static_slice(const MethodRecord& fm1,
                         const std::string& focal_file_source,
                         ChatBackend& backend,
                         const GenParams& params);

std::string static_slice_prompt(const MethodRecord& fm1, const std::string& focal_file_source);

// FM1 plus its directly called project methods that have covered lines,
// restricted to covered lines only.
DynamicSlice dynamic_slice(const MethodRecord& fm1,
                           const CoverageReport& report,
                           const std::vector<CallSite>& call_sites,
                           const MethodIndex& index);

std::string render_dynamic_slice(const DynamicSlice& slice);

// Inverse of render (method names and line texts); used for round-trips.
DynamicSlice parse_dynamic_slice(const std::string& text);

} // namespace testmend
