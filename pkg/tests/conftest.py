import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from eapmcert import _kernels

settings.register_profile(
    "repo", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("repo")

PRIMES = (2, 3, 5, 7)
ODD_PRIMES = (3, 5, 7)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture(params=_kernels.available_backends())
def backend(request):
    """Every kernel backend that was built (python always, cython when compiled)."""
    return request.param


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
