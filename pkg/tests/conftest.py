import pytest


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def report_line(request):
    """Record one summary line, printed again at the end of the session."""
    def add(line):
        print(line)
        request.config._acceptance_lines.append(line)
    return add


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
