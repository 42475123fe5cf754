import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a one-line verdict for an acceptance criterion."""
    def emit(name: str, ok: bool, detail: str = "") -> bool:
        line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
        _LINES.append(line)
        print(line, flush=True)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
