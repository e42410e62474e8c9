#include "testmend/subprocess.hpp"

#include <cerrno>
#include <chrono>
#include <cstring>
#include <stdexcept>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace testmend {

namespace {

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

} // namespace

CommandResult run_command(const std::string& shell_command,
                          const std::filesystem::path& cwd,
                          double timeout_s) {
    int pipefd[2];
    if (pipe(pipefd) != 0) {
        throw std::runtime_error("pipe() failed: " + std::string(strerror(errno)));
    }

    const double start = now_seconds();
    pid_t pid = fork();
    if (pid < 0) {
        close(pipefd[0]);
        close(pipefd[1]);
        throw std::runtime_error("fork() failed: " + std::string(strerror(errno)));
    }

    if (pid == 0) {
        setpgid(0, 0);
        close(pipefd[0]);
        dup2(pipefd[1], STDOUT_FILENO);
        dup2(pipefd[1], STDERR_FILENO);
        close(pipefd[1]);
        if (!cwd.empty() && chdir(cwd.c_str()) != 0) {
            _exit(127);
        }
        execl("/bin/sh", "sh", "-c", shell_command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }

    close(pipefd[1]);
    CommandResult result;
    const double deadline = start + timeout_s;
    char buf[4096];
    bool open = true;
    while (open) {
        double remaining = deadline - now_seconds();
        if (remaining <= 0) {
            result.timed_out = true;
            kill(-pid, SIGKILL);
            kill(pid, SIGKILL);
            remaining = 1.0;
        }
        struct pollfd pfd{pipefd[0], POLLIN, 0};
        int rc = poll(&pfd, 1, static_cast<int>(remaining * 1000) + 1);
        if (rc < 0) {
            if (errno == EINTR) {
                continue;
            }
            break;
        }
        if (rc == 0) {
            continue; // deadline handled at loop top
        }
        ssize_t n = read(pipefd[0], buf, sizeof(buf));
        if (n > 0) {
            result.output.append(buf, static_cast<size_t>(n));
        } else {
            open = false;
        }
        if (result.timed_out) {
            // Drain whatever is left without blocking forever.
            while ((n = read(pipefd[0], buf, sizeof(buf))) > 0) {
                result.output.append(buf, static_cast<size_t>(n));
            }
            open = false;
        }
    }
    close(pipefd[0]);

    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.exit_code = 128 + WTERMSIG(status);
    }
    result.duration_s = now_seconds() - start;
    return result;
}

} // namespace testmend
