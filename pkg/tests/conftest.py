"""Shared fixtures for the qbattery test suite.

The expensive resonant simulations are session-scoped so the acceptance
tests and the unit tests can share one diagonalization.
"""

import warnings

import numpy as np
import pytest

from qbattery.dynamics import QuenchSimulation, SimulationConfig
from qbattery.errors import CutoffWarning
from qbattery.tlm import resonance_solve


@pytest.fixture(scope="session")
def resonant_sim_n3():
    """N_B=2 simulation at the n=3 resonance root, M=12."""
    omega = resonance_solve(3, 2, 0.1)
    cfg = SimulationConfig(num_particles=2, omega_C=omega, g_BC=0.1,
                           modes_battery=12, modes_charger=12, target_n=3)
    return QuenchSimulation(cfg)


@pytest.fixture(scope="session")
def resonant_summary_n3(resonant_sim_n3):
    return resonant_sim_n3.summarize()


@pytest.fixture(autouse=True)
def _quiet_cutoff_warnings():
    """Cutoff warnings are exercised explicitly where they matter."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CutoffWarning)
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(20260813)
