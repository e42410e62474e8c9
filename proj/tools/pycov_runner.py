"""Run one pytest node in-process and write a line-coverage report.

Stdlib-only stand-in for `pytest --cov --cov-report=json:PATH`: executed
lines come from sys.settrace, executable lines from the compiled code
objects of every traced file. The report schema is

    {"files": {"rel/path.py": {"executed_lines": [...], "missing_lines": [...]}}}

Usage: python3 pycov_runner.py <pytest-args...> --report <path>
"""

import json
import os
import sys
import threading


def collect_statement_lines(path):
    with open(path, "r", encoding="utf-8") as f:
        source = f.read()
    code = compile(source, path, "exec")
    lines = set()
    stack = [code]
    while stack:
        c = stack.pop()
        for _, _, line in c.co_lines():
            if line is not None:
                lines.add(line)
        for const in c.co_consts:
            if hasattr(const, "co_lines"):
                stack.append(const)
    return lines


def main():
    argv = sys.argv[1:]
    report_path = None
    args = []
    i = 0
    while i < len(argv):
        if argv[i] == "--report":
            report_path = argv[i + 1]
            i += 2
        else:
            args.append(argv[i])
            i += 1

    root = os.getcwd()
    sys.path.insert(0, root)
    traced = {}

    def trace(frame, event, arg):
        filename = frame.f_code.co_filename
        if not (filename.startswith(root + os.sep) and filename.endswith(".py")):
            return None

        def local(frame, event, arg):
            if event == "line":
                traced.setdefault(frame.f_code.co_filename, set()).add(frame.f_lineno)
            return local

        if event == "call":
            traced.setdefault(filename, set()).add(frame.f_lineno)
            return local
        return None

    threading.settrace(trace)
    sys.settrace(trace)
    try:
        import pytest

        rc = pytest.main(args + ["-q", "-p", "no:cacheprovider"])
    finally:
        sys.settrace(None)
        threading.settrace(None)

    files = {}
    for filename, executed in sorted(traced.items()):
        rel = os.path.relpath(filename, root)
        if rel.startswith(".testmend"):
            continue
        try:
            statements = collect_statement_lines(filename)
        except (OSError, SyntaxError):
            continue
        files[rel] = {
            "executed_lines": sorted(executed & statements),
            "missing_lines": sorted(statements - executed),
        }

    if report_path:
        with open(report_path, "w", encoding="utf-8") as f:
            json.dump({"files": files}, f, indent=1, sort_keys=True)

    sys.exit(int(rc))


if __name__ == "__main__":
    main()
