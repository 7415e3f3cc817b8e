"""Discrete measures: finitely many weighted atoms with a resolution"""

import logging
from dataclasses import dataclass, field
from math import floor, log2

import numpy as np

from carnot import CarnotGroup, GroupIndex, StratificationSpec
from errors import GeometryError, SpecError


log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """mu = sum of w_j delta_{z_j}, trusted down to the scale 2^-K

    Attributes:
        spec: group the atoms live in
        points: exponential coordinates, shape (n, N)
        weights: positive finite weights, shape (n,)
        resolution: K
        name: free label, usually the generating scenario
    """

    spec: StratificationSpec
    points: np.ndarray
    weights: np.ndarray
    resolution: int
    name: str = 'measure'
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None] if self.spec.total_dim == 1 else points[None, :]
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if points.ndim != 2 or points.shape[1] != self.spec.total_dim:
            raise SpecError(f'{self.spec.name} atoms need {self.spec.total_dim} coordinates, got {points.shape}')

        if len(points) == 0:
            raise GeometryError('a discrete measure needs at least one atom')

        if weights.shape != (len(points),):
            raise GeometryError(f'{len(points)} atoms but {weights.size} weights')

        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(weights)) and np.all(weights > 0)):
            raise GeometryError('atoms must be finite with positive finite weights')

        points.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'resolution', int(self.resolution))

    def __len__(self) -> int:
        return len(self.points)

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def mass(self, indices=None) -> float:
        """mu of a set of atoms given by indices or a mask"""

        if indices is None:
            return self.total_mass
        return float(self.weights[np.asarray(indices)].sum())

    def restrict(self, mask) -> 'DiscreteMeasure':
        """mu restricted to the selected atoms"""

        mask = np.asarray(mask)
        return DiscreteMeasure(
            self.spec, self.points[mask], self.weights[mask], self.resolution,
            f'{self.name}|restricted', dict(self.params),
        )

    def translate(self, group: CarnotGroup, g) -> 'DiscreteMeasure':
        """Push forward under the left translation x -> g x"""

        moved = group.multiply(group.coords(g), self.points)
        return DiscreteMeasure(self.spec, moved, self.weights, self.resolution, self.name, dict(self.params))

    def dilate(self, group: CarnotGroup, t: float) -> 'DiscreteMeasure':
        """Push forward under delta_t; t must be a power of two

        Raises:
            GeometryError: t is not an integral power of two
        """

        shift = log2(t) if t > 0 else float('nan')
        if not shift == round(shift):
            raise GeometryError(f'dilations must be by powers of two to keep dyadic scales, got {t}')

        return DiscreteMeasure(
            self.spec, group.dilate(t, self.points), self.weights,
            self.resolution - int(round(shift)), self.name, dict(self.params),
        )

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'params': self.params,
            'group': self.spec.to_dict(),
            'resolution': self.resolution,
            'atoms': [
                {'coords': p.tolist(), 'weight': float(w)}
                for p, w in zip(self.points, self.weights)
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> 'DiscreteMeasure':
        spec = StratificationSpec.from_dict(doc['group'])
        atoms = doc['atoms']
        return cls(
            spec,
            np.array([a['coords'] for a in atoms], dtype=float).reshape(len(atoms), spec.total_dim),
            np.array([a['weight'] for a in atoms], dtype=float),
            int(doc['resolution']),
            doc.get('name', 'measure'),
            dict(doc.get('params', {})),
        )


def resolution_for(group: CarnotGroup, points) -> int:
    """Finest K whose cubes still hold two atoms on average

    K = floor(log2(1 / (2 * largest nearest neighbour distance))).
    """

    points = np.atleast_2d(group.coords(points))
    if len(points) < 2:
        return 0

    index = GroupIndex(group, points)
    gaps = np.empty(len(points))
    for i, p in enumerate(points):
        dist = index.distances(p)
        dist[i] = np.inf
        gaps[i] = dist.min()

    widest = float(gaps.max())
    if widest <= 0:
        return 0
    return int(floor(log2(1.0 / (2.0 * widest))))
