"""Shared fixtures and hypothesis strategies"""

from functools import lru_cache

import numpy as np
import pytest
from hypothesis import strategies as st

from carnot import CarnotGroup, HomogeneousNorm, abelian, calibrate_eta, engel, heisenberg


SEEDS = st.integers(min_value=0, max_value=2 ** 32 - 1)

PRESETS = {
    'abelian3': abelian(3),
    'h1': heisenberg(1),
    'h2': heisenberg(2),
    'engel': engel(),
}


@lru_cache(maxsize=None)
def calibrated(name: str) -> CarnotGroup:
    """Group with an eta calibrated on a reduced number of trials"""

    spec = PRESETS[name]
    result = calibrate_eta(spec, trials=20_000, seed=11)
    return CarnotGroup(spec, HomogeneousNorm(result.eta))


@pytest.fixture(params=['abelian3', 'h1', 'engel'])
def group(request) -> CarnotGroup:
    return calibrated(request.param)


@pytest.fixture
def h1() -> CarnotGroup:
    return CarnotGroup(heisenberg(1))


@pytest.fixture
def plane() -> CarnotGroup:
    return CarnotGroup(abelian(2))


@pytest.fixture
def line1() -> CarnotGroup:
    return CarnotGroup(abelian(1))


def random_points(group: CarnotGroup, seed: int, size: int, scale: float=1.0) -> np.ndarray:
    """Gaussian points, layer i scaled by scale^i"""

    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((size, group.dim))
    return raw * scale ** group.spec.layer_of
