import numpy as np
import pytest

from fracadams.grid import Grid, GridFunction


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gaussian(grid: Grid, width: float = 1.0) -> GridFunction:
    return GridFunction(grid, np.exp(-0.5 * (grid.radius() / width) ** 2))
