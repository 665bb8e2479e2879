import json

import numpy as np
import pytest

from hitlaw.measures import GridDensity
from hitlaw.systems import ExpandingCircleMap, SlowFamily, SolenoidFamily
from hitlaw.utils import make_rng


@pytest.fixture
def rng():
    return make_rng(20190821)


@pytest.fixture
def doubling():
    return ExpandingCircleMap(2)


@pytest.fixture
def perturbed():
    return ExpandingCircleMap(2, 0.05)


@pytest.fixture
def solenoid():
    return SolenoidFamily()


@pytest.fixture
def slow():
    return SlowFamily()


@pytest.fixture
def cosine_density():
    def f(n_cells=1024, amplitude=1.0):
        return GridDensity.from_function(
            lambda x: 1.0 + amplitude * np.cos(2 * np.pi * x), n_cells)

    return f


@pytest.fixture
def write_config(tmp_path):
    def go(name, **data):
        path = tmp_path / '{}.json'.format(name)
        data.setdefault('out', str(tmp_path / 'runs' / name))
        path.write_text(json.dumps(data))
        return str(path)

    return go
