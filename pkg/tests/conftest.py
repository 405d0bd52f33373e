import pytest

from vpbirman.birman_schwinger import BirmanSchwinger
from vpbirman.orbits import build_domain_grid, omega_bounds
from vpbirman.phase_space import build_sine_table
from vpbirman.steady_state import PolytropeParams, build_polytrope

TEST_KS = (1.0, 1.5, 2.5)
N_BETA = N_E = 16
N_R = 48
K_MAX = 32


class Model:
    """Steady state, domain grid, bounds and Birman-Schwinger factorisation for one k."""

    def __init__(self, k, n_beta=N_BETA, n_e=N_E, n_r=N_R, k_max=K_MAX):
        self.k = k
        self.state = build_polytrope(PolytropeParams(k=k))
        self.grid = build_domain_grid(self.state, n_beta, n_e)
        self.bounds = omega_bounds(self.grid)
        self.table = build_sine_table(self.grid, k_max, n_r)
        self.bs = BirmanSchwinger(self.table)

    @property
    def delta1(self):
        return self.bounds.delta1


_cache = {}


def get_model(k):
    if k not in _cache:
        _cache[k] = Model(k)
    return _cache[k]


@pytest.fixture(scope="session")
def models():
    return {k: get_model(k) for k in TEST_KS}


@pytest.fixture(scope="session")
def model1():
    return get_model(1.0)


@pytest.fixture(scope="session")
def state1(model1):
    return model1.state


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
