import pytest

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; all lines are echoed in the terminal summary."""
    def record(number: int, name: str, passed: bool, detail: str) -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {name}: {detail}"
        _CRITERIA.append(line)
        print(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
