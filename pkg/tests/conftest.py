import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def report(request):
    """Record a criterion verdict; lines are echoed in the terminal summary."""
    lines = request.config.stash[_LINES]

    def emit(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(line)
        lines.append((number, line))
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    lines = terminalreporter.config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
