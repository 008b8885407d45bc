import numpy as np
import pytest

from rsdfrc.scenario import Scenario, SolverConfig, SystemConfig, validate


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small():
    """4 antennas, 2 users, noise-normalized powers."""
    return validate(Scenario(system=SystemConfig(n_tx=4, n_users=2, total_power=100.0,
                                                 noise_power_user=1.0),
                             solver=SolverConfig(saa_samples=20, max_admm_iters=15,
                                                 max_ao_iters=40, inner_ao_iters=3)))


def crandn(rng, shape, var=1.0):
    return np.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
