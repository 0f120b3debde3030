import numpy as np
import pytest

import ehd


@pytest.fixture(scope="session")
def grid8():
    return ehd.Grid(8)


@pytest.fixture(scope="session")
def grid16():
    return ehd.Grid(16)


@pytest.fixture(scope="session")
def grid32():
    return ehd.Grid(32)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(key=20250809))


@pytest.fixture
def band_limited(rng):
    """Factory for random real fields supported inside the dealias band."""

    def make(grid):
        white = ehd.RealField(grid, rng.standard_normal((grid.n,) * 3))
        return ehd.backward_transform(ehd.forward_transform(white))

    return make
