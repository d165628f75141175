import pytest

# (criterion, passed, detail) lines collected by the acceptance module
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


@pytest.fixture
def report():
    def _report(criterion: str, passed: bool, detail: str):
        ACCEPTANCE_LINES.append((criterion, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'} {criterion}: {detail}")
        return passed
    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {crit}: {detail}")
