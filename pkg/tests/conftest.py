import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from powerctl.model import LogRateUtility, case_one, case_two

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance summary lines, printed at the end of the session
ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record a one-line PASS/FAIL verdict for an acceptance criterion."""

    def _report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def case1():
    inst = case_one()
    return inst, LogRateUtility(inst.weights)


@pytest.fixture(scope="session")
def case2():
    inst = case_two()
    return inst, LogRateUtility(inst.weights)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
