from functools import lru_cache

import numpy as np
import pytest

from mlbddc import HierarchySpec, build_hierarchy, setup


@lru_cache(maxsize=None)
def cached_setup(dim, levels, ratio, coarse_space):
    hier = build_hierarchy(HierarchySpec.uniform(dim, levels, ratio, coarse_space))
    return hier, setup(hier)


@pytest.fixture(scope="session")
def prec2c():
    return cached_setup(2, 2, 3, "C")[1]


@pytest.fixture(scope="session")
def prec2ce():
    return cached_setup(2, 2, 3, "CE")[1]


@pytest.fixture(scope="session")
def prec3l():
    """2D, three levels: small enough for dense checks on both levels."""
    return cached_setup(2, 3, 3, "C")[1]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
