import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for the acceptance summary and print it."""
    lines = request.config.stash.setdefault(_LINES, [])

    def emit(number, name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} [{number}] {name}" + (f": {detail}" if detail else "")
        lines.append(line)
        print(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
