import time

import pytest

_LINES: list[str] = []


@pytest.fixture
def gate():
    """Run an acceptance criterion, record its PASS/FAIL line and assert on it."""
    def run(fn):
        t0 = time.perf_counter()
        result = fn()
        result.seconds = time.perf_counter() - t0
        _LINES.append(result.line())
        print("\n" + result.line())
        assert result.passed, result.detail
    return run


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda l: int(l.split("]")[1].split(".")[0])):
            terminalreporter.write_line(line)
