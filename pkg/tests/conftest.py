import os

import pytest
from hypothesis import HealthCheck, settings

from vespa_sim.config import MHZ, paper_testbed

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", parent=settings.get_profile("default"), max_examples=1000)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

#: Every legal frequency of the 10-100 MHz, 5 MHz grid (19 values).
NOC_GRID = tuple(range(10 * MHZ, 100 * MHZ + 1, 5 * MHZ))
#: Every legal frequency of the 10-50 MHz tile islands.
TILE_GRID = tuple(range(10 * MHZ, 50 * MHZ + 1, 5 * MHZ))


@pytest.fixture(scope="session")
def testbed():
    return paper_testbed()


# -- acceptance report ---------------------------------------------------------------
# test_acceptance.py records one line per criterion here; the lines are
# printed in the terminal summary so they show up without ``-s``.
_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title}  [{detail}]"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
