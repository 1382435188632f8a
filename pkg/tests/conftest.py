import pytest

from sylvkit.primes import build_table

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def table_2e5():
    return build_table(200_000)


@pytest.fixture(scope="session")
def table_1e6():
    return build_table(1_000_000)


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
