import pytest

_ACCEPTANCE = []


@pytest.fixture
def record():
    """Log one acceptance criterion outcome for the end-of-run summary."""
    def _record(criterion: str, passed: bool, detail: str = ""):
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}" + (f" :: {detail}" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
