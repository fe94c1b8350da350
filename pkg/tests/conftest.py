import math

import numpy as np
import pytest

from epsim.evolve import DissipationRates
from epsim.paths import ParameterLoop

TEN_PI = 10 * math.pi
GAMMA_E = 6.2

_ACCEPTANCE_LINES = []


@pytest.fixture
def fig1e_loop():
    return ParameterLoop(J_max=30.0, J_min=0.3, Delta_amp=TEN_PI, T=1.5, gamma=GAMMA_E)


@pytest.fixture
def s3_rates():
    return DissipationRates(gamma_e=6.2, gamma_f=0.32, gamma_h=0.36, gamma_2f=0.9)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion."""

    def _report(criterion: str, ok: bool, detail: str):
        _ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {criterion}: {detail}")
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
