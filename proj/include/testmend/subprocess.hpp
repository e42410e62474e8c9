#pragma once

#include <filesystem>
#include <string>

namespace testmend {

struct CommandResult {
    int exit_code = -1;
    bool timed_out = false;
    std::string output;     // stdout + stderr, interleaved
    double duration_s = 0.0;
};

// Runs `shell_command` through /bin/sh -c in `cwd`, capturing combined
// output. On timeout the whole process group receives SIGKILL.
CommandResult run_command(const std::string& shell_command,
                          const std::filesystem::path& cwd,
                          double timeout_s);

} // namespace testmend
