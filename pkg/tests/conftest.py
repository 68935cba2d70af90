import pytest

from polarsl import catalog

ACCEPTANCE = []


def record(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
    ACCEPTANCE.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE, key=lambda t: t[0]):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sgn():
    return catalog.get_problem("sgn")
