#pragma once

#include "testmend/pysrc.hpp"

#include <string>

namespace testmend {

struct MethodDiff {
    MethodRecord old_method;
    MethodRecord new_method;
    std::string unified;  // ---/+++/@@ format, full-method context
};

MethodDiff compute_method_diff(const MethodRecord& old_method,
                               const MethodRecord& new_method);

// Applies a unified diff produced by compute_method_diff back onto the old
// source. Throws std::runtime_error when context lines do not match.
std::string apply_unified(const std::string& unified, const std::string& old_source);

// Count of '-' plus '+' body lines in a unified diff.
int count_change_lines(const std::string& unified);

} // namespace testmend
