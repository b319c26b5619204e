import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from alab.fibfam import TrapRegion, assemble, make_cascade_pair

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# alpha returned by search_generic_pair(2, 2, default_rng(0)); frozen so tests do not rerun the search
GENERIC_ALPHA = (1.40747676 + 0.37057002j, 0.8998064 + 0.09377882j)
EPS = 0.01


@pytest.fixture(scope="session")
def pair():
    return make_cascade_pair(2, 2, GENERIC_ALPHA)


@pytest.fixture(scope="session")
def endo(pair):
    return assemble(pair, EPS)


@pytest.fixture(scope="session")
def tubes():
    # calibrate_c on the generic pair at eps = 0.01 returns (8, 16); c = 4 and 5.66 also trap
    return TrapRegion(8.0, EPS), TrapRegion(16.0, EPS)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
