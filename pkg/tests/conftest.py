"""Shared pytest plumbing: the acceptance-criteria report section.

Acceptance tests register one human-readable line per criterion; the
lines are echoed after the run so pass/fail status and the measured
values are visible without -s.
"""

ACCEPTANCE_LINES = {}


def register_criterion(number: int, line: str) -> None:
    ACCEPTANCE_LINES[number] = line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria", sep="=")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number:2d}: {ACCEPTANCE_LINES[number]}")
