import pytest

_LINES: dict[str, str] = {}


@pytest.fixture
def report():
    """Record one pass/fail line for an acceptance criterion."""
    def _report(key, ok, detail):
        line = f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES[key] = line
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_LINES):
        terminalreporter.write_line(_LINES[key])
