"""Shared fixtures: a tiny oracle sweep and the dataset built from it."""

import numpy as np
import pytest

from builders import CALVING_VALUES, tiny_sim_config
from icesim.config import ScenarioParams
from icesim.meshgen import generate_mesh
from icesim.transient import simulate
from pipeline.dataset import build_dataset
from pipeline.normalization import nominal_bounds


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def calving_config():
    return tiny_sim_config("calving")


@pytest.fixture(scope="session")
def calving_mesh(calving_config):
    return generate_mesh(calving_config)


@pytest.fixture(scope="session")
def calving_trajectories(calving_config, calving_mesh):
    """Two 3-state calving runs on the shared tiny mesh."""
    return [simulate(calving_config, ScenarioParams("calving", v), mesh=calving_mesh) for v in CALVING_VALUES]


@pytest.fixture(scope="session")
def calving_dataset(calving_config, calving_mesh, calving_trajectories):
    return build_dataset(calving_trajectories, calving_mesh, bounds=nominal_bounds(calving_config))
