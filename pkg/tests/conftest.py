"""
Shared fixtures: bundled beam parameters, tabulated plants and the 2-mode
controller/observer design.
"""
import numpy as np
import pytest

from manipulator import fixtures
from manipulator.functional_observer import synthesize_with_escalation
from manipulator.modal_analysis import BeamParams, tabulated_modal_data
from manipulator.plant_model import build_plant
from manipulator.smc_control import SlidingSpec


@pytest.fixture(scope="session")
def params():
    return BeamParams(**fixtures.BEAM_PARAMS)


@pytest.fixture(scope="session")
def table_modal(params):
    return tabulated_modal_data(
        params, fixtures.TABLE_OMEGA, fixtures.TABLE_PHI_PRIME_0, fixtures.TABLE_PHI_L
    )


@pytest.fixture(scope="session")
def plant5(table_modal):
    return build_plant(table_modal)


@pytest.fixture(scope="session")
def plant2(table_modal):
    return build_plant(table_modal.truncated(2))


@pytest.fixture(scope="session")
def sliding2(plant2):
    return SlidingSpec.create(np.array(fixtures.GAMMA), fixtures.K1, fixtures.K2, plant2)


@pytest.fixture(scope="session")
def observer2(plant2, sliding2):
    return synthesize_with_escalation(
        plant2,
        sliding2,
        np.array(fixtures.OBSERVER_N),
        np.array(fixtures.OBSERVER_L),
    )


@pytest.fixture
def x0_2():
    return np.array(fixtures.default_x0(2))


@pytest.fixture
def x0_5():
    return np.array(fixtures.default_x0(5))
