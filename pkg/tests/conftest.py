import math

import numpy as np
import pytest

from kamforge import driver as D
from kamforge import series as S
from kamforge.diophantine import estimate_C0
from kamforge.step import Hamiltonian

PHI = (1 + math.sqrt(5)) / 2
N_FIX, D_FIX = 12, 4
RHO0, KAPPA0 = 0.5, 0.6


def golden_f(eps, N=N_FIX, d=D_FIX):
    """``eps (cos a1 + cos(a1 - a2))``."""
    h = eps / 2
    terms = {((1, 0), (0, 0)): h, ((-1, 0), (0, 0)): h, ((1, -1), (0, 0)): h, ((-1, 1), (0, 0)): h}
    return S.FourierTaylorSeries.from_terms(2, N, d, terms)


def coupled_f(eps, N=N_FIX, d=D_FIX):
    """``eps [(1 + A1) cos a1 + cos(a1 - a2) + A1 + (A1^2 + A2^2)/2]``."""
    h = eps / 2
    terms = {
        ((1, 0), (0, 0)): h, ((-1, 0), (0, 0)): h,
        ((1, 0), (1, 0)): h, ((-1, 0), (1, 0)): h,
        ((1, -1), (0, 0)): h, ((-1, 1), (0, 0)): h,
        ((0, 0), (1, 0)): eps, ((0, 0), (2, 0)): h, ((0, 0), (0, 2)): h,
    }
    return S.FourierTaylorSeries.from_terms(2, N, d, terms)


@pytest.fixture(scope="session")
def golden_freq():
    return estimate_C0([1.0, PHI], 40)


@pytest.fixture(scope="session")
def make_hamiltonian(golden_freq):
    def make(f, J=1.0, rho=RHO0, kappa=KAPPA0):
        return Hamiltonian(J, golden_freq, f, S.PolydiskDomain(2, rho, kappa))

    return make


@pytest.fixture(scope="session")
def golden_H(make_hamiltonian):
    return make_hamiltonian(golden_f(1e-4))


@pytest.fixture(scope="session")
def golden_run(golden_H):
    """One driver run on the golden-mean fixture, shared by the whole session."""
    return D.run(golden_H, D.DriverConfig(max_steps=10, target_eta=1e-25))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance bookkeeping ---------------------------------------------------

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        ok = rep.outcome == "passed"
        prev = _criteria.get(number, (title, True))
        _criteria[number] = (title, prev[1] and ok)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok = _criteria[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}")
