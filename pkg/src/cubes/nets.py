"""Nested nets X_{k_min} ⊆ .. ⊆ X_{k_max}, each 2^-k separated"""

import logging
from dataclasses import dataclass

import numpy as np

from carnot import CarnotGroup, GroupIndex
from errors import NetError


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Nets:
    """Indices into a point array, one list per level, each extending the last

    Attributes:
        k_min: coarsest level
        k_max: finest level
        levels: point indices of X_k in insertion order; levels[0][0] is x_0
        scale: side of level k is scale * 2^-k
    """

    k_min: int
    k_max: int
    levels: tuple[np.ndarray, ...]
    scale: float = 1.0

    def level(self, k: int) -> np.ndarray:
        if not self.k_min <= k <= self.k_max:
            raise NetError(f'level {k} outside {self.k_min}..{self.k_max}')
        return self.levels[k - self.k_min]

    def radius(self, k: int) -> float:
        return self.scale * 2.0 ** -k

    @property
    def base_index(self) -> int:
        return int(self.levels[0][0])


def build_nets(group: CarnotGroup, points, k_min: int, k_max: int, scale: float=1.0) -> Nets:
    """Greedy farthest point nets, coarsest first

    The first point is x_0. At each level the point farthest from the current
    net joins it while that distance is at least the level radius, so every
    net extends the previous one and covers the sample within its radius.
    Ties go to the lowest index.

    Raises:
        NetError: empty input or k_max < k_min
    """

    points = np.atleast_2d(group.coords(points))
    if len(points) == 0:
        raise NetError('cannot build nets over an empty point set')

    if k_max < k_min:
        raise NetError(f'k_max={k_max} is below k_min={k_min}')

    if not scale > 0:
        raise NetError(f'net scale must be positive, got {scale}')

    chosen = [0]
    gap = np.atleast_1d(group.distance(points[0], points))
    levels = []
    for k in range(k_min, k_max + 1):
        radius = scale * 2.0 ** -k
        while True:
            j = int(np.argmax(gap))
            if gap[j] < radius:
                break
            chosen.append(j)
            gap = np.minimum(gap, group.distance(points[j], points))

        levels.append(np.array(chosen, dtype=int))
        log.debug('Net level %s: %s points', k, len(chosen))

    return Nets(k_min, k_max, tuple(levels), scale)


def lattice_nets(points, depth: int, k_min: int=0, scale: float=1.0) -> Nets:
    """Nets of a sample lying on the lattice scale * 2^-depth * Z^n

    X_k holds the points whose lattice coordinates are all divisible by
    2^(depth-k), previous levels first. Only meaningful for abelian groups
    with the Euclidean norm, where these sets are exactly 2^-k separated.

    Raises:
        NetError: points off the lattice or a first point that is not on every net
    """

    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) == 0:
        raise NetError('cannot build nets over an empty point set')

    if depth < k_min:
        raise NetError(f'depth={depth} is below k_min={k_min}')

    ticks = points / (scale * 2.0 ** -depth)
    lattice = np.rint(ticks).astype(np.int64)
    if np.abs(ticks - lattice).max() > 1e-6:
        raise NetError('points are not on the dyadic lattice')

    levels = []
    seen = np.zeros(len(points), dtype=bool)
    order = []
    for k in range(k_min, depth + 1):
        divisor = 2 ** (depth - k)
        member = np.all(lattice % divisor == 0, axis=1)
        new = np.flatnonzero(member & ~seen)
        order.extend(new.tolist())
        seen |= member
        levels.append(np.array(order, dtype=int))

    if not levels[0].size or levels[0][0] != 0:
        raise NetError('the first point must lie on the coarsest lattice')

    return Nets(k_min, depth, tuple(levels), scale)


def check_nets(group: CarnotGroup, points, nets: Nets) -> None:
    """Verify nesting, x_0 membership and separation

    Raises:
        NetError: naming the first violated property and a witness
    """

    points = np.atleast_2d(group.coords(points))
    x0 = nets.base_index
    previous = np.array([], dtype=int)
    for k in range(nets.k_min, nets.k_max + 1):
        level = nets.level(k)
        if level.size == 0 or level[0] != x0:
            raise NetError(f'x_0 is not the first point of X_{k}')

        if not np.array_equal(level[:previous.size], previous):
            raise NetError(f'X_{k - 1} is not a prefix of X_{k}')

        if np.unique(level).size != level.size:
            raise NetError(f'X_{k} repeats a point')

        gap, pair = GroupIndex(group, points[level]).separation()
        if gap < nets.radius(k) * (1 - 1e-12):
            raise NetError(f'X_{k} is not {nets.radius(k)}-separated: points {level[list(pair)]} at {gap}')

        previous = level
