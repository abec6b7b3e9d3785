"""Shared pytest plumbing: surface the acceptance-criteria lines in the
terminal summary (plain prints are swallowed by fd-level capture)."""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
