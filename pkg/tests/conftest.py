import pytest

from persist_dde.models import nicholson, nicholson_system


@pytest.fixture
def nich2():
    return nicholson(d=1.0, p=2.0, tau=0.5)


@pytest.fixture
def nich_half():
    return nicholson(d=1.0, p=0.5, tau=0.5)


@pytest.fixture
def nich_periodic():
    return nicholson(d=1.0, p={"mean": 2.0, "amp": 0.5, "period": 1.0}, tau=0.5)


@pytest.fixture
def nich_system():
    return nicholson_system()


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
