"""Discrete measures for the standard examples

Every generator takes the group, a seeded generator and its own keyword
parameters and returns a DiscreteMeasure. Unknown parameters are rejected,
so a scenario is reproducible from (name, params, seed) alone.
"""

import inspect
import logging
from dataclasses import dataclass, field
from itertools import product
from math import ceil, log2

import numpy as np

from carnot import CarnotGroup
from errors import GeometryError, SpecError
from trees import DiscreteMeasure, resolution_for
from utils import make_rng


log = logging.getLogger(__name__)

CORNERS = np.array(list(product((0.0, 1.0), repeat=2)))


def _embed(group: CarnotGroup, planar: np.ndarray, columns=(0, 1)) -> np.ndarray:
    """Planar points placed on two coordinates, zero elsewhere"""

    points = np.zeros((len(planar), group.dim))
    for j, column in enumerate(columns[:planar.shape[1]]):
        points[:, column] = planar[:, j]
    return points


def _horizontal_pair(group: CarnotGroup) -> tuple[int, int]:
    """Two horizontal coordinates, the first of each Heisenberg pair when the group has them"""

    width = group.spec.layer_dims[0]
    if width < 2:
        raise SpecError(f'{group.spec.name} has a single horizontal direction')
    return (0, width // 2) if group.spec.step == 2 and width % 2 == 0 else (0, 1)


def _uniform(group: CarnotGroup, points: np.ndarray, resolution: int, name: str, params: dict) -> DiscreteMeasure:
    weights = np.full(len(points), 1 / len(points))
    return DiscreteMeasure(group.spec, points, weights, resolution, name, params)


def _arclength(planar: np.ndarray, n: int) -> np.ndarray:
    """n points equally spaced by length along the polygonal path through planar"""

    steps = np.linalg.norm(np.diff(planar, axis=0), axis=1)
    at = np.concatenate(([0.0], np.cumsum(steps)))
    if at[-1] == 0:
        raise GeometryError('the path has zero length')
    s = np.linspace(0, at[-1], n)
    return np.column_stack([np.interp(s, at, planar[:, j]) for j in range(planar.shape[1])])


def segment(group: CarnotGroup, rng, n: int=1000, length: float=1.0) -> DiscreteMeasure:
    """n equal atoms on [0, length] e_1"""

    if n < 2 or length <= 0:
        raise GeometryError(f'a segment needs n >= 2 and a positive length, got n={n}, length={length}')
    points = np.zeros((n, group.dim))
    points[:, 0] = np.linspace(0, length, n)
    return _uniform(group, points, ceil(log2(n)), 'segment', {'n': n, 'length': length})


def polyline_curve(group: CarnotGroup, rng, n: int=600, vertices=((0, 0), (1, 0), (1, 1))) -> DiscreteMeasure:
    """n atoms equally spaced along a planar polygonal path in two horizontal directions"""

    planar = np.asarray(vertices, dtype=float)
    if planar.ndim != 2 or planar.shape[1] != 2 or len(planar) < 2:
        raise GeometryError('polyline vertices must be two or more planar points')
    if n < 2:
        raise GeometryError(f'need at least two atoms, got {n}')
    columns = _horizontal_pair(group)
    points = _embed(group, _arclength(planar, n), columns)
    if not group.is_abelian:
        points = _lift(group, points, columns)
    return _uniform(group, points, ceil(log2(n)), 'polyline-curve', {'n': n, 'vertices': planar.tolist()})


def _lift(group: CarnotGroup, points: np.ndarray, columns: tuple[int, int]) -> np.ndarray:
    """Horizontal lift: t grows by (x dy - y dx) / 2, trapezoid rule

    Raises:
        SpecError: the group is not a Heisenberg group
    """

    dims = group.spec.layer_dims
    if len(dims) != 2 or dims[1] != 1 or dims[0] % 2:
        raise SpecError(f'horizontal lifts need a Heisenberg group, not {group.spec.name}')

    x, y = points[:, columns[0]], points[:, columns[1]]
    increments = 0.5 * (x[:-1] * y[1:] - y[:-1] * x[1:])
    lifted = points.copy()
    lifted[:, -1] = np.concatenate(([0.0], np.cumsum(increments)))
    return lifted


def heisenberg_horizontal_curve(group: CarnotGroup, rng, n: int=500, radius: float=0.5) -> DiscreteMeasure:
    """Lift of the planar circle of the given radius through the origin"""

    if n < 2 or radius <= 0:
        raise GeometryError(f'need n >= 2 and a positive radius, got n={n}, radius={radius}')
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    planar = np.column_stack([radius * np.sin(theta), radius * (1 - np.cos(theta))])
    columns = _horizontal_pair(group)
    points = _lift(group, _embed(group, planar, columns), columns)
    return _uniform(group, points, ceil(log2(n)), 'heisenberg-horizontal-curve', {'n': n, 'radius': radius})


def _corner_cantor(ratio: float, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Lower left corners of the 4^depth squares and the branch index of every generation"""

    corners = np.zeros((1, 2))
    branches = np.zeros((1, 0), dtype=int)
    side = 1.0
    for _ in range(depth):
        side *= ratio
        offsets = CORNERS * (side / ratio - side)
        corners = (corners[:, None, :] + offsets[None, :, :]).reshape(-1, 2)
        branches = np.hstack([np.repeat(branches, 4, axis=0), np.tile(np.arange(4), len(branches))[:, None]])
    return corners, branches


def cantor(group: CarnotGroup, rng, s: float=1.0, depth: int=6) -> DiscreteMeasure:
    """Planar four corner Cantor set of dimension s, equal mass 4^-depth per square

    Each square keeps its four corner squares scaled by 4^(-1/s).

    Raises:
        GeometryError: s outside (0, 2]
    """

    if not 0 < s <= 2:
        raise GeometryError(f'four corner Cantor sets have dimension in (0, 2], got {s}')
    if depth < 0:
        raise GeometryError(f'depth must be nonnegative, got {depth}')
    ratio = 4 ** (-1 / s)
    corners, _ = _corner_cantor(ratio, depth)
    points = _embed(group, corners + ratio ** depth / 2, _horizontal_pair(group))
    resolution = ceil(depth * log2(1 / ratio))
    return _uniform(group, points, resolution, 'cantor', {'s': s, 'depth': depth})


def four_corner_cantor(group: CarnotGroup, rng, depth: int=6) -> DiscreteMeasure:
    """The dimension one four corner Cantor set, ratio 1/4"""

    mu = cantor(group, rng, 1.0, depth)
    return DiscreteMeasure(mu.spec, mu.points, mu.weights, mu.resolution, 'four-corner-cantor', {'depth': depth})


def self_similar_unbalanced(group: CarnotGroup, rng, weights=(0.7, 0.1, 0.1, 0.1), depth: int=6) -> DiscreteMeasure:
    """Four corner Cantor set of ratio 1/4 with the given branch weights"""

    weights = np.asarray(weights, dtype=float)
    if weights.shape != (4,) or np.any(weights <= 0):
        raise GeometryError('four positive branch weights are required')
    weights = weights / weights.sum()
    corners, branches = _corner_cantor(0.25, depth)
    points = _embed(group, corners + 0.25 ** depth / 2, _horizontal_pair(group))
    masses = np.prod(weights[branches], axis=1)
    return DiscreteMeasure(
        group.spec, points, masses, 2 * depth, 'self-similar-unbalanced',
        {'weights': weights.tolist(), 'depth': depth},
    )


def dyadic_interval(group: CarnotGroup, rng, depth: int=10) -> DiscreteMeasure:
    """Atoms i 2^-depth e_1 of [0, 1) with equal masses, on the dyadic lattice"""

    if depth < 0:
        raise GeometryError(f'depth must be nonnegative, got {depth}')
    points = np.zeros((2 ** depth, group.dim))
    points[:, 0] = np.arange(2 ** depth) / 2 ** depth
    return _uniform(group, points, depth, 'dyadic-interval', {'depth': depth})


def lebesgue_grid(group: CarnotGroup, rng, depth: int=8) -> DiscreteMeasure:
    """Unit square lattice of side 2^-depth with equal masses"""

    if depth < 0:
        raise GeometryError(f'depth must be nonnegative, got {depth}')
    ticks = np.arange(2 ** depth) / 2 ** depth
    planar = np.array(list(product(ticks, ticks)))
    points = _embed(group, planar, _horizontal_pair(group))
    return _uniform(group, points, depth, 'lebesgue-grid', {'depth': depth})


def vertical_segment(group: CarnotGroup, rng, n: int=512, length: float=1.0) -> DiscreteMeasure:
    """n equal atoms on the last coordinate axis, vertical in non-abelian groups"""

    if n < 2 or length <= 0:
        raise GeometryError(f'need n >= 2 and a positive length, got n={n}, length={length}')
    points = np.zeros((n, group.dim))
    points[:, -1] = np.linspace(0, length, n)
    return _uniform(group, points, resolution_for(group, points), 'vertical-segment-H1', {'n': n, 'length': length})


def atom_sum(group: CarnotGroup, rng, points=None, weights=None, resolution: int|None=None) -> DiscreteMeasure:
    """Explicit atoms, a unit atom at the identity by default"""

    points = np.zeros((1, group.dim)) if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.ones(len(points)) if weights is None else np.asarray(weights, dtype=float)
    if resolution is None:
        resolution = resolution_for(group, points)
    return DiscreteMeasure(group.spec, points, weights, resolution, 'atom-sum', {'atoms': len(points)})


def circle(group: CarnotGroup, rng, n: int=512, radius: float=0.5) -> DiscreteMeasure:
    """n equal atoms on a planar circle centred at the identity"""

    if n < 3 or radius <= 0:
        raise GeometryError(f'need n >= 3 and a positive radius, got n={n}, radius={radius}')
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    planar = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    points = _embed(group, planar, _horizontal_pair(group))
    return _uniform(group, points, ceil(log2(n)), 'circle', {'n': n, 'radius': radius})


def two_segments(group: CarnotGroup, rng, n: int=512, gap: float=0.5) -> DiscreteMeasure:
    """Two parallel unit segments gap apart, n atoms each"""

    if n < 2 or gap <= 0:
        raise GeometryError(f'need n >= 2 and a positive gap, got n={n}, gap={gap}')
    line = np.linspace(0, 1, n)
    planar = np.vstack([np.column_stack([line, np.zeros(n)]), np.column_stack([line, np.full(n, gap)])])
    points = _embed(group, planar, _horizontal_pair(group))
    return _uniform(group, points, ceil(log2(n)), 'two-segments', {'n': n, 'gap': gap})


def uniform_ball(group: CarnotGroup, rng, n: int=400, radius: float=1.0) -> DiscreteMeasure:
    """n random atoms of the Euclidean ball in exponential coordinates"""

    if n < 1 or radius <= 0:
        raise GeometryError(f'need n >= 1 and a positive radius, got n={n}, radius={radius}')
    direction = rng.standard_normal((n, group.dim))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    points = direction * radius * rng.random((n, 1)) ** (1 / group.dim)
    return _uniform(group, points, resolution_for(group, points), 'uniform-ball', {'n': n, 'radius': radius})


GENERATORS = {
    'segment': segment,
    'polyline-curve': polyline_curve,
    'heisenberg-horizontal-curve': heisenberg_horizontal_curve,
    'cantor': cantor,
    'four-corner-cantor': four_corner_cantor,
    'self-similar-unbalanced': self_similar_unbalanced,
    'lebesgue-grid': lebesgue_grid,
    'dyadic-interval': dyadic_interval,
    'vertical-segment-H1': vertical_segment,
    'atom-sum': atom_sum,
    'circle': circle,
    'two-segments': two_segments,
    'uniform-ball': uniform_ball,
}


@dataclass(frozen=True)
class Scenario:
    """A named generator with its parameters and seed"""

    name: str
    params: dict = field(default_factory=dict)
    seed: int|None = None

    def generate(self, group: CarnotGroup) -> DiscreteMeasure:
        return generate(self.name, group, self.seed, **self.params)


def parameters(name: str) -> dict:
    """Keyword parameters of a generator and their defaults"""

    if name not in GENERATORS:
        raise ValueError(f'unknown scenario: {name}')
    signature = inspect.signature(GENERATORS[name])
    return {p.name: p.default for p in list(signature.parameters.values())[2:]}


def generate(name: str, group: CarnotGroup, seed: int|None=None, **params) -> DiscreteMeasure:
    """Build the measure of a scenario

    Raises:
        ValueError: unknown scenario or parameter
        GeometryError: parameters out of range
        SpecError: a scenario that does not exist in the group
    """

    unknown = set(params) - set(parameters(name))
    if unknown:
        raise ValueError(f'unknown parameters for {name}: {", ".join(sorted(unknown))}')

    mu = GENERATORS[name](group, make_rng(seed), **params)
    log.info('Generated %s in %s: %s atoms, resolution %s', name, group.spec.name, len(mu), mu.resolution)
    return mu


