"""Shared pytest configuration.

Collects the one-line verdicts emitted by the acceptance tests and prints
them in the terminal summary so the final report always carries one
pass/fail line per criterion, regardless of output capturing.
"""

from __future__ import annotations

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
