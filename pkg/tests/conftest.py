"""Shared pytest configuration: echo acceptance-criterion lines.

The acceptance tests append one PASS/FAIL line each to CRITERION_LINES;
writing them from the terminal-summary hook keeps them visible in normal
(captured) runs.
"""

CRITERION_LINES = []


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
