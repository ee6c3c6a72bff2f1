import numpy as np
import pytest
from hypothesis import settings

from nlgauge.grid import make_grid

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


@pytest.fixture
def grid16():
    return make_grid(1.0, 16)


def brute_pairs(M):
    return [(i, j) for i in range(M) for j in range(M) if i != j]
