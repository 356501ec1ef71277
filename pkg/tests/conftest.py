import numpy as np
import pytest

from sdlab.grid_forms import Grid
from tests.utils import MAXWELL_CONFIG, TELEGRAPHER_CONFIG, write_config


@pytest.fixture
def rng_fx():
    yield np.random.default_rng(42)


@pytest.fixture(scope="session")
def grids_fx():
    yield {1: Grid.periodic((16,)), 2: Grid.periodic((8, 8)), 3: Grid.periodic((8, 8, 8))}


@pytest.fixture(scope="session")
def metric_grids_fx():
    yield {
        1: Grid.periodic((16,), metric=(2.0,)),
        2: Grid.periodic((8, 12), length=(2 * np.pi, 3.0), metric=(1.0, 3.0)),
        3: Grid.periodic((8, 8, 6), metric=(1.0, 2.0, 0.5)),
    }


@pytest.fixture(scope="session")
def fluid_grid_fx():
    yield Grid.periodic((8, 8, 8))


@pytest.fixture(scope="session")
def line_grid_fx():
    yield Grid.periodic((64,))


@pytest.fixture
def maxwell_config_fx(tmp_path):
    yield write_config(tmp_path / "maxwell.json", MAXWELL_CONFIG)


@pytest.fixture
def telegrapher_config_fx(tmp_path):
    yield write_config(tmp_path / "telegrapher.json", TELEGRAPHER_CONFIG)
