import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=int(os.environ.get("AWP_LAB_HYPOTHESIS_EXAMPLES", "25")),
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")

# criterion number -> (passed, summary); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict = {}


def record_acceptance(number: int, passed: bool, summary: str) -> None:
    ACCEPTANCE_RESULTS[number] = (bool(passed), summary)
    # visible immediately with -s, and again in the terminal summary
    print(f"{'PASS' if passed else 'FAIL'} criterion {number}: {summary}", file=sys.stderr)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, summary = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {summary}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
