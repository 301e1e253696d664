"""Shared test plumbing: the acceptance tests register one verdict line
per criterion here; the hook prints them after the test summary so they
stay visible under output capture."""

ACCEPT_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPT_LINES:
        terminalreporter.section("acceptance verdicts")
        for line in ACCEPT_LINES:
            terminalreporter.write_line(line)
