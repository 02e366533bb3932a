import pytest

# (label, ok, detail) tuples appended by the acceptance module
ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_RESULTS


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
