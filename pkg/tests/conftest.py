import numpy as np
import pytest

from acdc_microgrid.controllers import DEFAULT_GAINS
from acdc_microgrid.equilibrium import feasible_reference_hint, solve_equilibrium
from acdc_microgrid.plant import DEFAULT_PARAMS, Disturbances
from acdc_microgrid.scenario_file import load_bundled
from acdc_microgrid.simulator import run

REPLICA_DECIMATE = 100


@pytest.fixture(scope="session")
def replica_scenario():
    return load_bundled("replica")


@pytest.fixture(scope="session")
def replica_run(replica_scenario):
    """The 20 s replica at 0.1 ms sampling, run once per session."""
    import time
    sc = replica_scenario.replace(decimate=REPLICA_DECIMATE)
    t0 = time.perf_counter()
    tr = run(sc)
    return tr, time.perf_counter() - t0


@pytest.fixture(scope="session")
def operating_point():
    d = Disturbances(V_PV=600.0, V_B=700.0, V_S=1200.0, R_L=50.0)
    r = feasible_reference_hint(d, DEFAULT_PARAMS, p_ac=1.5 * 325.0 * 0.8, x1_star=598.0)
    return r, d, solve_equilibrium(r, d, DEFAULT_PARAMS)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def gains():
    return DEFAULT_GAINS


def pytest_terminal_summary(terminalreporter):
    from support import ACCEPTANCE
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
