#pragma once

#include "testmend/subprocess.hpp"
#include "testmend/util.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>

// Builds the six-commit history fixture used by the git-miner checks.
// Hand-derived classification of the mined (parent -> head) records:
//   c2 -> head  (from the c3 change)  AssertionFailure
//   c4 -> head  (from the c5 change)  ReducedCoverage
//   c5 -> head  (from the c6 change)  NoSignal
// c2 is a whitespace-only focal edit and c4 a comment-only test edit, so
// neither produces a record at all.
namespace testmend::testing {

namespace fs = std::filesystem;

inline void git_in(const fs::path& repo, const std::string& args) {
    CommandResult result = run_command(
        "git -c user.name=fixture -c user.email=fixture@example.com -C '" +
            repo.string() + "' " + args,
        fs::current_path(), 60.0);
    if (result.exit_code != 0) {
        throw std::runtime_error("git fixture step failed (" + args + "): " + result.output);
    }
}

inline void build_history_fixture(const fs::path& repo) {
    fs::create_directories(repo / "pkg");
    fs::create_directories(repo / "tests");
    git_in(repo, "init --quiet");
    write_file(repo / "pkg" / "__init__.py", "");

    auto commit = [&](const std::string& message) {
        git_in(repo, "add -A");
        git_in(repo, "commit --quiet -m '" + message + "'");
    };

    // c1: initial pair.
    write_file(repo / "pkg" / "calc.py",
               "def add(a, b):\n"
               "    total = a + b\n"
               "    return total\n");
    write_file(repo / "tests" / "test_calc.py",
               "from pkg.calc import add\n"
               "\n"
               "\n"
               "def test_add():\n"
               "    assert add(2, 3) == 5\n");
    commit("initial pair");

    // c2: whitespace-only focal edit (no structural change).
    write_file(repo / "pkg" / "calc.py",
               "def add(a, b):\n"
               "    total = a+b\n"
               "    return total\n");
    commit("tidy spacing");

    // c3: behavior change with the matching test update (AF source).
    write_file(repo / "pkg" / "calc.py",
               "def add(a, b):\n"
               "    total = a + b + 1\n"
               "    return total\n");
    write_file(repo / "tests" / "test_calc.py",
               "from pkg.calc import add\n"
               "\n"
               "\n"
               "def test_add():\n"
               "    assert add(2, 3) == 6\n");
    commit("shift results by one");

    // c4: comment-only test edit (no structural change).
    write_file(repo / "tests" / "test_calc.py",
               "from pkg.calc import add\n"
               "\n"
               "\n"
               "def test_add():\n"
               "    # checks addition\n"
               "    assert add(2, 3) == 6\n");
    commit("annotate test");

    // c5: new branch plus the covering assertion (CC source).
    write_file(repo / "pkg" / "calc.py",
               "def add(a, b):\n"
               "    total = a + b + 1\n"
               "    if a < 0:\n"
               "        total = total - 1\n"
               "    return total\n");
    write_file(repo / "tests" / "test_calc.py",
               "from pkg.calc import add\n"
               "\n"
               "\n"
               "def test_add():\n"
               "    # checks addition\n"
               "    assert add(2, 3) == 6\n"
               "    assert add(-1, 1) == 0\n");
    commit("discount negative lhs");

    // c6: benign refactor on both sides (NoSignal record).
    write_file(repo / "pkg" / "calc.py",
               "def add(a, b):\n"
               "    total = a + b + 1\n"
               "    if a < 0:\n"
               "        total = total - 1\n"
               "    result = total\n"
               "    return result\n");
    write_file(repo / "tests" / "test_calc.py",
               "from pkg.calc import add\n"
               "\n"
               "\n"
               "def test_add():\n"
               "    # checks addition\n"
               "    assert add(-1, 1) == 0\n"
               "    assert add(2, 3) == 6\n");
    commit("name the result");
}

} // namespace testmend::testing
