import pytest

_LINES = []


@pytest.fixture
def criterion():
    """Record and print one pass/fail line, then assert on it."""

    def check(number, ok, detail=""):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _LINES.append((number, line))
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_LINES):
        terminalreporter.write_line(line)
