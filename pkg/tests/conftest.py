"""Shared pytest configuration: acceptance marker and summary lines.

The acceptance tests append one "[criterion N] name: PASS/FAIL" line per
criterion to ``criterion_lines``; the terminal-summary hook prints them
in a dedicated section at the end of the run so the verdicts stay visible
even when per-test output is captured.
"""

criterion_lines = []


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance: full-scale acceptance criteria (minutes of runtime)")


def pytest_terminal_summary(terminalreporter):
    if criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(criterion_lines):
            terminalreporter.write_line(line)
