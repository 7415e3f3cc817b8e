"""Whitney decompositions of the sample off a closed subset"""

import logging
from dataclasses import dataclass

import numpy as np

from carnot import GroupIndex
from constants import WHITNEY_FACTOR
from errors import GeometryError, InvariantViolation
from .system import Cube, CubeSystem


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WhitneyFamily:
    """Maximal cubes W with diam W <= dist(W, E)

    Attributes:
        cubes: the family, coarsest first
        diams: realized diameter of every cube
        dists: dist(W, E) of every cube
        ball_constant: measured c with max(diam W, side W / 3) >= c * side W / 6
        uncovered: off-E points in finest cubes that meet E or are wider than their distance to E
    """

    cubes: tuple[Cube, ...]
    diams: np.ndarray
    dists: np.ndarray
    ball_constant: float
    uncovered: np.ndarray

    def __len__(self) -> int:
        return len(self.cubes)

    def covered(self, system: CubeSystem) -> np.ndarray:
        """Sample indices inside the family"""

        if not self.cubes:
            return np.array([], dtype=int)
        return np.sort(np.concatenate([system.members(c) for c in self.cubes]))


def effective_diam(system: CubeSystem, cube: Cube) -> float:
    """Realized diameter, a third of the side for cubes with a single point

    Zero diameter cubes carry no flatness and would make beta undefined.
    """

    diam = system.diam(cube)
    return diam if diam > 0 else cube.side / 3


def unresolved(system: CubeSystem, mask: np.ndarray, to_e: np.ndarray) -> np.ndarray:
    """Off-E points the finest level cannot separate from E

    A finest cube that meets E, or is wider than its distance to E, has
    no finer cube to split it, so its off-E points stay outside any
    Whitney cube.
    """

    level = system.k_max
    row = system.assignment(level)
    stuck = np.zeros(len(mask), dtype=bool)
    for i in np.unique(row[~mask]):
        cube = system.cube(level, i)
        members = system.members(cube)
        if mask[members].any() or system.diam(cube) > to_e[members].min():
            stuck[members] = True
    return np.flatnonzero(stuck & ~mask)


def whitney(system: CubeSystem, subset) -> WhitneyFamily:
    """Whitney cubes of the sample off E

    A cube is taken when its realized diameter is at most its distance to
    E. The upper bound dist(W, E) < (128 / c) diam W is checked with the
    diameter floored at a third of the side, since sample cubes can be
    far thinner than the balls they contain.

    Args:
        system (CubeSystem): the cubes
        subset (array-like): sample indices or a boolean mask of E

    Raises:
        GeometryError: E is empty
        InvariantViolation: a family cube is too large for its distance to E,
            too far from E for its size, or an off-E point the finest level
            separates from E is left uncovered

    Returns:
        WhitneyFamily: maximal cubes, empty when E is the whole sample
    """

    n = len(system.points)
    subset = np.asarray(subset)
    mask = subset.astype(bool) if subset.dtype == bool else np.isin(np.arange(n), subset)
    if not mask.any():
        raise GeometryError('Whitney decomposition needs a nonempty closed set E')

    if mask.all():
        log.debug('E is the whole sample, Whitney family is empty')
        return WhitneyFamily((), np.array([]), np.array([]), 0.0, np.array([], dtype=int))

    _, to_e = GroupIndex(system.group, system.points[mask]).nearest(system.points)
    taken = mask.copy()
    chosen, diams, dists = [], [], []
    for level in system.levels:
        row = system.assignment(level)
        for i in np.unique(row[~taken]):
            cube = system.cube(level, i)
            members = system.members(cube)
            if taken[members].any():
                continue
            diam = system.diam(cube)
            dist = float(to_e[members].min())
            if diam <= dist:
                chosen.append(cube)
                diams.append(diam)
                dists.append(dist)
                taken[members] = True

    diams = np.array(diams)
    dists = np.array(dists)
    if np.any(diams > dists):
        raise InvariantViolation('a Whitney cube is larger than its distance to E')

    sides = np.array([c.side for c in chosen])
    ball_diams = np.maximum(diams, sides / 3)
    ball_constant = float((6 * ball_diams / sides).min()) if chosen else 0.0
    if ball_constant > 0:
        inner = np.array([c.level > system.k_min for c in chosen], dtype=bool)
        bound = (WHITNEY_FACTOR / ball_constant) * ball_diams
        if np.any(dists[inner] >= bound[inner]):
            raise InvariantViolation('a Whitney cube lies too far from E for its size')

    uncovered = np.flatnonzero(~taken)
    stuck = unresolved(system, mask, to_e)
    if np.setdiff1d(uncovered, stuck).size:
        raise InvariantViolation(
            f'{np.setdiff1d(uncovered, stuck).size} off-E points the finest cubes resolve are in no Whitney cube'
        )
    if uncovered.size:
        log.warning('%s off-E points share a finest cube with E or sit closer to E than its diameter', uncovered.size)
    log.debug('Whitney family: %s cubes, %s uncovered points', len(chosen), uncovered.size)
    return WhitneyFamily(tuple(chosen), diams, dists, ball_constant, uncovered)
