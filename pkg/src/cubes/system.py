"""Dyadic cube systems built from nested nets

A cube of level k is identified with its centre, a point of X_k. Every net
point of level k + 1 hangs below its nearest centre of level k and every
sample point below its nearest finest centre, so the cubes of a level
partition the sample and nest across levels by construction.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.spatial import ConvexHull, QhullError

from carnot import CarnotGroup, GroupIndex
from constants import DOUBLE_BALL_RADIUS, INNER_RADIUS, NEAR_FACTOR, OUTER_RADIUS
from errors import NetError
from utils import chunks
from .nets import Nets, check_nets


log = logging.getLogger(__name__)

HULL_THRESHOLD = 2000


@dataclass(frozen=True)
class Cube:
    """One cube Q of the system

    Attributes:
        level: generation k
        index: position of the centre in X_k
        center: index of the centre x_Q in the sample
        parent: index of the parent at level k - 1, -1 at the coarsest level
        side: scale * 2^-k
    """

    level: int
    index: int
    center: int
    parent: int
    side: float

    @property
    def key(self) -> tuple[int, int]:
        return (self.level, self.index)

    @property
    def id(self) -> str:
        return f'{self.level}:{self.index}'

    @property
    def radius(self) -> float:
        """Radius of B_Q"""
        return OUTER_RADIUS * self.side


def parse_cube_id(text: str) -> tuple[int, int]:
    level, index = text.split(':')
    return int(level), int(index)


class CubeSystem:
    """Cubes of levels k_min..k_max over a finite sample of a group

    Immutable once built; derived tables are cached on first use.
    """

    def __init__(self, group: CarnotGroup, points: np.ndarray, nets: Nets,
                 parents: dict[int, np.ndarray], assignment: np.ndarray):
        self.group = group
        self.points = points
        self.nets = nets
        self._parents = parents
        self._assignment = assignment
        self._diam_cache = {}
        self._ball_cache = {}

    def __repr__(self) -> str:
        return f'CubeSystem({self.group.spec.name}, levels {self.k_min}..{self.k_max}, {len(self.points)} points)'

    @property
    def k_min(self) -> int:
        return self.nets.k_min

    @property
    def k_max(self) -> int:
        return self.nets.k_max

    @property
    def levels(self) -> range:
        return range(self.k_min, self.k_max + 1)

    @property
    def base_point(self) -> np.ndarray:
        return self.points[self.nets.base_index]

    def side(self, level: int) -> float:
        return self.nets.radius(level)

    def count(self, level: int) -> int:
        return self.nets.level(level).size

    def centers(self, level: int) -> np.ndarray:
        """Sample indices of the centres of level k, in cube order"""
        return self.nets.level(level)

    def parents(self, level: int) -> np.ndarray:
        return self._parents[level]

    def assignment(self, level: int) -> np.ndarray:
        """Cube index of every sample point at level k"""

        if level not in self.levels:
            raise NetError(f'level {level} outside {self.k_min}..{self.k_max}')
        return self._assignment[level - self.k_min]

    def cube(self, level: int, index: int) -> Cube:
        return Cube(
            level, int(index),
            int(self.centers(level)[index]),
            int(self._parents[level][index]),
            self.side(level),
        )

    def cubes(self, level: int) -> list[Cube]:
        return [self.cube(level, i) for i in range(self.count(level))]

    def parent(self, cube: Cube) -> Cube|None:
        if cube.parent < 0:
            return None
        return self.cube(cube.level - 1, cube.parent)

    def ancestor(self, cube: Cube, level: int) -> Cube:
        """The cube of the given coarser level containing cube"""

        if not self.k_min <= level <= cube.level:
            raise NetError(f'level {level} is not an ancestor level of {cube.id}')

        index = cube.index
        for k in range(cube.level, level, -1):
            index = self._parents[k][index]
        return self.cube(level, index)

    @cached_property
    def _child_table(self) -> dict[int, list[np.ndarray]]:
        table = {}
        for level in self.levels[:-1]:
            parents = self._parents[level + 1]
            order = np.argsort(parents, kind='stable')
            bounds = np.searchsorted(parents[order], np.arange(self.count(level) + 1))
            table[level] = [order[bounds[i]:bounds[i + 1]] for i in range(self.count(level))]
        return table

    def children(self, cube: Cube) -> list[Cube]:
        if cube.level == self.k_max:
            return []
        return [self.cube(cube.level + 1, j) for j in self._child_table[cube.level][cube.index]]

    def descendants(self, cube: Cube, level: int) -> np.ndarray:
        """Indices of the level-k descendants of cube"""

        if not cube.level <= level <= self.k_max:
            raise NetError(f'level {level} is not below {cube.id}')

        ancestors = np.arange(self.count(level))
        for k in range(level, cube.level, -1):
            ancestors = self._parents[k][ancestors]
        return np.flatnonzero(ancestors == cube.index)

    def is_descendant(self, cube: Cube, ancestor: Cube) -> bool:
        if cube.level < ancestor.level:
            return False
        return self.ancestor(cube, ancestor.level).index == ancestor.index

    @cached_property
    def _member_table(self) -> list[tuple[np.ndarray, np.ndarray]]:
        table = []
        for level in self.levels:
            row = self.assignment(level)
            order = np.argsort(row, kind='stable')
            bounds = np.searchsorted(row[order], np.arange(self.count(level) + 1))
            table.append((order, bounds))
        return table

    def members(self, cube: Cube) -> np.ndarray:
        """Sorted sample indices of the points of cube"""

        order, bounds = self._member_table[cube.level - self.k_min]
        return order[bounds[cube.index]:bounds[cube.index + 1]]

    def masses(self, level: int, weights) -> np.ndarray:
        """mu(Q) for every cube of a level"""

        return np.bincount(self.assignment(level), weights=weights, minlength=self.count(level))

    def mass(self, cube: Cube, weights) -> float:
        return float(np.asarray(weights)[self.members(cube)].sum())

    def diam(self, cube: Cube) -> float:
        """Realized diameter: largest distance between two member points"""

        if cube.key not in self._diam_cache:
            self._diam_cache[cube.key] = self._diameter(self.points[self.members(cube)])
        return self._diam_cache[cube.key]

    def _diameter(self, pts: np.ndarray) -> float:
        if len(pts) < 2:
            return 0.0

        group = self.group
        if group.is_abelian and len(pts) > HULL_THRESHOLD:
            if group.dim == 1:
                return float(np.ptp(pts[:, 0]) / group.norm.eta)
            try:
                pts = pts[ConvexHull(pts).vertices]
            except QhullError:
                pass

        best = 0.0
        rows = max((1 << 22) // len(pts), 1)
        for part in chunks(len(pts), rows):
            best = max(best, float(group.pairwise(pts[part], pts).max()))
        return best

    @cached_property
    def point_index(self) -> GroupIndex:
        return GroupIndex(self.group, self.points)

    def center_index(self, level: int) -> GroupIndex:
        key = ('centers', level)
        if key not in self._ball_cache:
            self._ball_cache[key] = GroupIndex(self.group, self.points[self.centers(level)])
        return self._ball_cache[key]

    def ball_members(self, level: int, factor: float=DOUBLE_BALL_RADIUS) -> sparse.csr_matrix:
        """Incidence of sample points in the balls B(x_Q, factor * side) of a level

        Returns:
            csr_matrix: shape (cubes of the level, sample points), ones where contained
        """

        key = ('balls', level, factor)
        if key not in self._ball_cache:
            radius = factor * self.side(level)
            index = self.point_index
            rows = [index.within(self.points[c], radius) for c in self.centers(level)]
            indptr = np.concatenate(([0], np.cumsum([r.size for r in rows])))
            indices = np.concatenate(rows) if rows else np.array([], dtype=int)
            self._ball_cache[key] = sparse.csr_matrix(
                (np.ones(indices.size), indices, indptr),
                shape=(self.count(level), len(self.points)),
            )
        return self._ball_cache[key]

    def cube_of(self, x) -> list[Cube]:
        """Chain of cubes containing an arbitrary query point, coarsest first

        A query point belongs to the cubes of its nearest finest centre.
        """

        finest, _ = self.center_index(self.k_max).nearest(np.atleast_2d(self.group.coords(x)))
        cube = self.cube(self.k_max, int(finest[0]))
        return [self.ancestor(cube, level) for level in self.levels]

    def chain(self, point: int) -> list[Cube]:
        """Cubes containing sample point `point`, coarsest first"""

        return [self.cube(level, self.assignment(level)[point]) for level in self.levels]

    def to_dict(self) -> dict:
        return {
            'spec': self.group.spec.name,
            'eta': self.group.norm.eta,
            'k_min': self.k_min,
            'k_max': self.k_max,
            'scale': self.nets.scale,
            'base_point': self.base_point.tolist(),
            'levels': [
                {
                    'level': level,
                    'cubes': [
                        {
                            'id': cube.id,
                            'center': self.points[cube.center].tolist(),
                            'parent': f'{level - 1}:{cube.parent}' if cube.parent >= 0 else None,
                            'side': cube.side,
                        }
                        for cube in self.cubes(level)
                    ],
                }
                for level in self.levels
            ],
        }


def build_cubes(group: CarnotGroup, points, nets: Nets, check: bool=True) -> CubeSystem:
    """Assign every net point to its nearest coarser centre

    Args:
        group (CarnotGroup): ambient group
        points (array-like): the sample the nets index into
        nets (Nets): nested nets over the sample
        check (bool): verify the net properties first

    Raises:
        NetError: nets that are not nested, separated or rooted at x_0

    Returns:
        CubeSystem: the cubes of levels nets.k_min..nets.k_max
    """

    points = np.atleast_2d(group.coords(points)).astype(float)
    if check:
        check_nets(group, points, nets)

    parents = {nets.k_min: np.full(nets.level(nets.k_min).size, -1, dtype=int)}
    for k in range(nets.k_min + 1, nets.k_max + 1):
        coarse, fine = nets.level(k - 1), nets.level(k)
        idx, _ = GroupIndex(group, points[coarse]).nearest(points[fine])
        if not np.array_equal(idx[:coarse.size], np.arange(coarse.size)):
            raise NetError(f'a centre of level {k - 1} is not its own child at level {k}')
        parents[k] = idx

    levels = nets.k_max - nets.k_min + 1
    assignment = np.empty((levels, len(points)), dtype=int)
    assignment[-1], _ = GroupIndex(group, points[nets.level(nets.k_max)]).nearest(points)
    for row, k in zip(range(levels - 2, -1, -1), range(nets.k_max, nets.k_min, -1)):
        assignment[row] = parents[k][assignment[row + 1]]

    system = CubeSystem(group, points, nets, parents, assignment)
    log.debug('Built %s', system)
    return system


@dataclass
class CubeReport:
    """Realized properties of a cube system

    Attributes:
        partition: every point in exactly one cube per level
        nesting: point cubes nest across levels
        inheritance: every centre is the centre of one of its own children
        origin: x_0 is a centre at every level
        outer_constant: largest d(point, centre) / side
        inner_constant: largest c with U(x_Q, c side) inside Q for all cubes, capped at 1/6
        inner_violations: cubes whose (1/6)-ball leaks out, as ids
        max_children: M, the child count bound
        mean_near: average #Near(Q) over sampled cubes
        max_near: largest #Near(Q) seen
    """

    partition: bool
    nesting: bool
    inheritance: bool
    origin: bool
    outer_constant: float
    inner_constant: float
    inner_violations: list[str] = field(default_factory=list)
    max_children: int = 0
    mean_near: float = 0.0
    max_near: int = 0

    @property
    def roundness(self) -> bool:
        return self.outer_constant <= OUTER_RADIUS and not self.inner_violations

    @property
    def passed(self) -> bool:
        return self.partition and self.nesting and self.inheritance and self.origin and self.roundness


def check_cubes(system: CubeSystem, near_factor: float=NEAR_FACTOR, near_samples: int=64) -> CubeReport:
    """Verify the dyadic cube properties on the realized system

    Roundness failures are reported with the achieved constants and logged,
    not raised.
    """

    group, points = system.group, system.points
    n = len(points)
    partition = all(
        system.assignment(k).min(initial=0) >= 0 and system.assignment(k).max(initial=0) < system.count(k)
        for k in system.levels
    )
    nesting = all(
        np.array_equal(system.parents(k)[system.assignment(k)], system.assignment(k - 1))
        for k in system.levels[1:]
    )
    inheritance = all(
        np.array_equal(system.parents(k)[:system.count(k - 1)], np.arange(system.count(k - 1)))
        for k in system.levels[1:]
    )
    origin = all(system.centers(k)[0] == system.nets.base_index for k in system.levels) and all(
        system.assignment(k)[system.nets.base_index] == 0 for k in system.levels
    )

    outer = 0.0
    inner = INNER_RADIUS
    violations = []
    for k in system.levels:
        row = system.assignment(k)
        centers = system.centers(k)
        side = system.side(k)
        outer = max(outer, float(np.max(group.distance(points[centers[row]], points))) / side)
        for i, c in enumerate(centers):
            nearby = system.point_index.within(points[c], INNER_RADIUS * side)
            leaking = nearby[row[nearby] != i]
            if leaking.size:
                violations.append(f'{k}:{i}')
                inner = min(inner, float(group.distance(points[c], points[leaking]).min()) / side)

    children = max(
        (max((len(c) for c in system._child_table[k]), default=0) for k in system.levels[:-1]),
        default=0,
    )

    sizes = []
    for k in system.levels[1:]:
        step = max(system.count(k) // max(near_samples // max(len(system.levels) - 1, 1), 1), 1)
        for i in range(0, system.count(k), step):
            sizes.append(len(near(system, system.cube(k, i), near_factor)))

    report = CubeReport(
        partition, nesting, inheritance, origin, outer, inner, violations,
        children, float(np.mean(sizes)) if sizes else 0.0, max(sizes, default=0),
    )
    log.info(
        'Cube system over %s points: max children %s, #Near mean %.1f max %s',
        n, report.max_children, report.mean_near, report.max_near,
    )
    if not report.roundness:
        log.warning(
            'Roundness not met: outer constant %.4f, inner constant %.4f over %s cubes',
            report.outer_constant, report.inner_constant, len(report.inner_violations),
        )
    return report


def near(system: CubeSystem, cube: Cube, factor: float=NEAR_FACTOR) -> list[Cube]:
    """Near(Q): cubes R of levels k-1 and k with 2B_R meeting factor * B_Q

    Intersection is decided by d(x_Q, x_R) <= radius(factor B_Q) + radius(2B_R).
    At the coarsest level only same level cubes exist.
    """

    x_q = system.points[cube.center]
    reach = factor * OUTER_RADIUS * cube.side
    found = []
    for level in (cube.level - 1, cube.level):
        if level < system.k_min:
            log.debug("Near(%s) at the coarsest level %s has no level %s cubes", cube.index, system.k_min, level)
            continue
        radius = reach + DOUBLE_BALL_RADIUS * system.side(level)
        found.extend(system.cube(level, i) for i in system.center_index(level).within(x_q, radius))
    return found


def near_containment(system: CubeSystem, cube: Cube, cubes: list[Cube]) -> float:
    """Smallest lambda with 2B_R inside lambda B_Q for all given R"""

    x_q = system.points[cube.center]
    worst = 0.0
    for other in cubes:
        reach = float(system.group.distance(x_q, system.points[other.center])) + DOUBLE_BALL_RADIUS * other.side
        worst = max(worst, reach / (OUTER_RADIUS * cube.side))
    return worst
