import numpy as np
import pytest

from calabi_lab.decay_iteration import RadialMetricState, iterate
from calabi_lab.radial import RadialGrid
from calabi_lab.settings import ExperimentConfig

TOY_C = (0.3, 0.05)


@pytest.fixture(scope="session")
def toy_config():
    return ExperimentConfig.defaults()


@pytest.fixture(scope="session")
def toy_grid():
    return RadialGrid.log_uniform(5.0, 200.0, 4000, 3)


@pytest.fixture(scope="session")
def toy_state(toy_grid):
    return RadialMetricState.model(toy_grid, TOY_C)


@pytest.fixture(scope="session")
def toy_iteration(toy_state):
    return iterate(toy_state, 3)


@pytest.fixture
def log_grid():
    return RadialGrid.log_uniform(1.0, 10.0, 400, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
