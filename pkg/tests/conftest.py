import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from morreylab.grid import Grid, GridFunction


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def grid1d():
    return Grid(1, 4)


@pytest.fixture
def grid2d():
    return Grid(2, 3)


def random_function(grid: Grid, rng, lo: float = -3.0, hi: float = 3.0) -> GridFunction:
    return GridFunction(grid, np.exp(rng.uniform(lo, hi, grid.shape)))
