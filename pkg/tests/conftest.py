import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    """Log one acceptance line, then assert the criterion."""

    def _record(criterion, ok, detail):
        line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
