import pytest


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for the terminal summary; returns the verdict."""
    lines = request.config.stash.setdefault(_LINES, [])

    def report(number, name, ok, detail):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {name} ({detail})"
        lines.append((number, line))
        print(line)
        return ok

    return report


_LINES = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
