"""Ball-mass ratios at dyadic radii: lower density and upper doubling"""

import logging

import numpy as np

from carnot import CarnotGroup, GroupIndex
from trees import DiscreteMeasure


log = logging.getLogger(__name__)


def dyadic_radii(depth: int) -> np.ndarray:
    """2^-k for k = 0..depth"""

    if depth < 0:
        raise ValueError(f'depth must be nonnegative, got {depth}')
    return 2.0 ** -np.arange(depth + 1)


def _center(mu: DiscreteMeasure, x) -> np.ndarray:
    return mu.points[int(x)] if np.ndim(x) == 0 else np.asarray(x, dtype=float)


def lower_density(group: CarnotGroup, mu: DiscreteMeasure, x, depth: int|None=None,
                  index: GroupIndex|None=None) -> float:
    """min over r in {1, 1/2, .., 2^-K} of mu(B(x, r)) / 2r

    Args:
        group (CarnotGroup): ambient group
        mu (DiscreteMeasure): the measure
        x: atom index or query point
        depth (int, optional): K, by default the resolution of mu
        index (GroupIndex, optional): prebuilt index over the atoms
    """

    radii = dyadic_radii(mu.resolution if depth is None else depth)
    index = index or GroupIndex(group, mu.points)
    masses = index.ball_mass(_center(mu, x), radii, mu.weights)
    return float((masses / (2 * radii)).min())


def lower_densities(group: CarnotGroup, mu: DiscreteMeasure, depth: int|None=None) -> np.ndarray:
    """lower_density at every atom"""

    index = GroupIndex(group, mu.points)
    return np.array([lower_density(group, mu, i, depth, index) for i in range(len(mu))])


def upper_doubling(group: CarnotGroup, mu: DiscreteMeasure, x, depth: int|None=None,
                   index: GroupIndex|None=None) -> float:
    """max over dyadic r of mu(B(x, 2r)) / mu(B(x, r))

    Radii where both balls are empty are skipped; an empty small ball
    under a charged large one gives inf.
    """

    radii = dyadic_radii(mu.resolution if depth is None else depth)
    index = index or GroupIndex(group, mu.points)
    center = _center(mu, x)
    small = index.ball_mass(center, radii, mu.weights)
    large = index.ball_mass(center, 2 * radii, mu.weights)

    charged = large > 0
    if not charged.any():
        return 0.0
    with np.errstate(divide='ignore'):
        return float((large[charged] / small[charged]).max())


def upper_doublings(group: CarnotGroup, mu: DiscreteMeasure, depth: int|None=None) -> np.ndarray:
    index = GroupIndex(group, mu.points)
    return np.array([upper_doubling(group, mu, i, depth, index) for i in range(len(mu))])
