import pytest

# filled by tests/test_acceptance.py, one (label, passed, detail) per criterion
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_line():
    def record(label, passed, detail):
        ACCEPTANCE_LINES.append((label, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(ACCEPTANCE_LINES, key=lambda r: int(r[0].split()[0])):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {label}: {detail}")
