import pytest

from tests import acceptance_log


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acceptance_log.RESULTS):
        terminalreporter.write_line(acceptance_log.RESULTS[number])


@pytest.fixture(autouse=True)
def _reset_default_dtype():
    from gmsam import numerics as nx

    nx.set_default_dtype(32)
    yield
    nx.set_default_dtype(32)
