"""Trees of cubes, their leaves and mu-normalized sum functions"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np

from constants import DOUBLE_BALL_DIAM, DOUBLE_BALL_RADIUS
from cubes import Cube, CubeSystem
from errors import NetError
from .measure import DiscreteMeasure


log = logging.getLogger(__name__)

CubeKey = tuple[int, int]


@dataclass(frozen=True, eq=False)
class CubeTree:
    """A set of cubes below a unique top, closed under taking ancestors up to it

    Attributes:
        system: the cube system the keys refer to
        top: (level, index) of Top(T)
        members: (level, index) keys, top included
    """

    system: CubeSystem = field(repr=False)
    top: CubeKey
    members: frozenset[CubeKey]

    def __post_init__(self):
        members = frozenset((int(k), int(i)) for k, i in self.members)
        object.__setattr__(self, 'members', members)
        object.__setattr__(self, 'top', (int(self.top[0]), int(self.top[1])))
        if self.top not in members:
            raise NetError('a tree must contain its top cube')

        for level, index in members:
            if level == self.top[0]:
                if index != self.top[1]:
                    raise NetError(f'{level}:{index} sits beside the top cube')
                continue

            if level < self.top[0]:
                raise NetError(f'{level}:{index} lies above the top cube')

            parent = int(self.system.parents(level)[index])
            if (level - 1, parent) not in members:
                raise NetError(f'the parent of {level}:{index} is missing from the tree')

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, cube) -> bool:
        key = cube.key if isinstance(cube, Cube) else cube
        return key in self.members

    @property
    def top_cube(self) -> Cube:
        return self.system.cube(*self.top)

    @cached_property
    def by_level(self) -> dict[int, np.ndarray]:
        """Sorted cube indices per level"""

        table = {}
        for level, index in self.members:
            table.setdefault(level, []).append(index)
        return {level: np.array(sorted(idx), dtype=int) for level, idx in sorted(table.items())}

    @property
    def deepest(self) -> int:
        return max(self.by_level)

    def mask(self, level: int) -> np.ndarray:
        """Boolean flags over all cubes of a level"""

        flags = np.zeros(self.system.count(level), dtype=bool)
        flags[self.by_level.get(level, [])] = True
        return flags

    def cubes(self) -> list[Cube]:
        return [self.system.cube(k, i) for k, idx in self.by_level.items() for i in idx]

    def to_dict(self) -> dict:
        return {
            'top': f'{self.top[0]}:{self.top[1]}',
            'cubes': [f'{k}:{i}' for k, idx in self.by_level.items() for i in idx],
        }

    @classmethod
    def full(cls, system: CubeSystem, top: Cube, depth: int|None=None) -> 'CubeTree':
        """Every descendant of top down to the given level (default k_max)"""

        depth = system.k_max if depth is None else depth
        members = {
            (level, int(j))
            for level in range(top.level, depth + 1)
            for j in system.descendants(top, level)
        }
        return cls(system, top.key, frozenset(members))

    @classmethod
    def from_masks(cls, system: CubeSystem, top: Cube, masks: Mapping[int, np.ndarray]) -> 'CubeTree':
        members = {(level, int(i)) for level, flags in masks.items() for i in np.flatnonzero(flags)}
        return cls(system, top.key, frozenset(members))


def leaves(tree: CubeTree) -> np.ndarray:
    """Atoms whose chain of cubes stays in the tree down to the resolution"""

    system = tree.system
    if tree.deepest < system.k_max:
        return np.array([], dtype=int)

    return np.flatnonzero(tree.mask(system.k_max)[system.assignment(system.k_max)])


def leaves_by_levels(tree: CubeTree) -> np.ndarray:
    """The intersection over levels of the union of tree cubes, on atoms"""

    system = tree.system
    inside = np.ones(len(system.points), dtype=bool)
    for level in range(tree.top[0], system.k_max + 1):
        inside &= tree.mask(level)[system.assignment(level)]
    return np.flatnonzero(inside)


def cube_values(tree: CubeTree, b: Mapping[CubeKey, float]|Callable[[Cube], float]) -> dict[int, np.ndarray]:
    """b(Q) for every tree cube, zero off the tree, per level"""

    system = tree.system
    values = {}
    for level, idx in tree.by_level.items():
        row = np.zeros(system.count(level))
        for i in idx:
            value = b(system.cube(level, i)) if callable(b) else b.get((level, int(i)), 0.0)
            if value < 0:
                raise ValueError(f'b must be nonnegative, got {value} on {level}:{i}')
            row[i] = value
        values[level] = row
    return values


def cube_terms(tree: CubeTree, b, mu: DiscreteMeasure) -> dict[int, np.ndarray]:
    """b(Q) / mu(Q) for every tree cube, with 0/0 = 0 and b/0 = inf, per level"""

    terms = {}
    for level, values in cube_values(tree, b).items():
        masses = tree.system.masses(level, mu.weights)
        row = np.zeros_like(values)
        positive = values > 0
        with np.errstate(divide='ignore'):
            row[positive] = values[positive] / masses[positive]
        terms[level] = row
    return terms


def sum_function_all(tree: CubeTree, b, mu: DiscreteMeasure) -> np.ndarray:
    """S_{T,b}(mu, x) at every atom x"""

    system = tree.system
    total = np.zeros(len(system.points))
    for level, values in cube_terms(tree, b, mu).items():
        total += values[system.assignment(level)]
    return total


def sum_function(tree: CubeTree, b, mu: DiscreteMeasure, x) -> float:
    """S_{T,b}(mu, x) = sum over tree cubes Q containing x of b(Q) chi_Q(x) / mu(Q)

    Args:
        tree (CubeTree): the tree
        b: mapping from cube keys, or a callable on cubes, to nonnegative reals
        mu (DiscreteMeasure): the measure, aligned with the system sample
        x: an atom index, or the coordinates of a query point

    Returns:
        float: the sum, possibly inf
    """

    system = tree.system
    if np.ndim(x) == 0:
        chain = system.chain(int(x))
    else:
        chain = system.cube_of(x)

    terms = cube_terms(tree, b, mu)
    return float(sum(terms[c.level][c.index] for c in chain if c.key in tree.members))


def double_ball_densities(system: CubeSystem, mu: DiscreteMeasure, level: int) -> np.ndarray:
    """mu(2B_R) / diam 2B_R for the cubes of a level"""

    balls = system.ball_members(level, DOUBLE_BALL_RADIUS)
    return (balls @ mu.weights) / (DOUBLE_BALL_DIAM * system.side(level))


def density_tree(system: CubeSystem, top: Cube, mu: DiscreteMeasure, c: float) -> CubeTree|None:
    """Cubes below top whose whole ancestor chain up to top has mu(2B_R) >= c diam 2B_R

    Returns:
        CubeTree: the tree, or None when top itself is not dense enough
    """

    if not c > 0:
        raise ValueError(f'density threshold must be positive, got {c}')

    if double_ball_densities(system, mu, top.level)[top.index] < c:
        return None

    masks = {top.level: np.zeros(system.count(top.level), dtype=bool)}
    masks[top.level][top.index] = True
    for level in range(top.level + 1, system.k_max + 1):
        dense = double_ball_densities(system, mu, level) >= c
        inherited = masks[level - 1][system.parents(level)]
        masks[level] = dense & inherited
        if not masks[level].any():
            break

    return CubeTree.from_masks(system, top, masks)
