"""Metric ball and nearest point queries over a fixed point array"""

import logging

import numpy as np
from scipy.spatial import cKDTree

from utils import chunks
from .group import CarnotGroup


log = logging.getLogger(__name__)

NEAREST_BLOCK = 1 << 22
RADIUS_SLACK = 1e-9


class GroupIndex:
    """Spatial index of points of a Carnot group

    Abelian groups are indexed exactly by a KD-tree. Otherwise the tree holds
    the first layer projections, which prefilter balls because
    d(x, y) >= |pi_1(x) - pi_1(y)| / eta; candidates are then filtered with
    the exact distance.
    """

    def __init__(self, group: CarnotGroup, points):
        self.group = group
        self.points = np.atleast_2d(group.coords(points)).astype(float, copy=False)
        self._width = group.dim if group.is_abelian else group.spec.layer_dims[0]
        self._tree = cKDTree(self.points[:, :self._width])

    def __len__(self) -> int:
        return len(self.points)

    def distances(self, center, idx=None) -> np.ndarray:
        """Distances from center to the indexed points (or a subset)"""

        pts = self.points if idx is None else self.points[idx]
        return np.atleast_1d(self.group.distance(np.asarray(center, dtype=float), pts))

    def within(self, center, radius: float) -> np.ndarray:
        """Sorted indices of points in the closed ball B(center, radius)"""

        center = np.asarray(self.group.coords(center), dtype=float)
        euclid = radius * self.group.norm.eta * (1 + RADIUS_SLACK) + RADIUS_SLACK
        cand = np.array(sorted(self._tree.query_ball_point(center[:self._width], euclid)), dtype=int)
        if cand.size == 0:
            return cand

        return cand[self.distances(center, cand) <= radius]

    def nearest(self, queries) -> tuple[np.ndarray, np.ndarray]:
        """Nearest indexed point of every query, lowest index on ties

        Returns:
            tuple: indices and distances, both shape (m,)
        """

        queries = np.atleast_2d(self.group.coords(queries))
        if self.group.is_abelian:
            return self._nearest_tree(queries)

        idx = np.empty(len(queries), dtype=int)
        dist = np.empty(len(queries))
        rows = max(NEAREST_BLOCK // max(len(self.points), 1), 1)
        for part in chunks(len(queries), rows):
            block = self.group.pairwise(queries[part], self.points)
            idx[part] = np.argmin(block, axis=1)
            dist[part] = block[np.arange(block.shape[0]), idx[part]]

        return idx, dist

    def _nearest_tree(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k = min(4, len(self.points))
        dist, idx = self._tree.query(queries, k=k)
        dist = np.asarray(dist).reshape(len(queries), k)
        idx = np.asarray(idx).reshape(len(queries), k)

        # Among the returned neighbours at the minimal distance keep the lowest index
        tied = dist <= dist[:, :1] * (1 + 1e-12)
        best = np.where(tied, idx, np.iinfo(int).max).min(axis=1)
        return best, dist[:, 0] / self.group.norm.eta

    def separation(self) -> tuple[float, tuple[int, int]]:
        """Smallest distance between two distinct indexed points and the pair

        Returns:
            tuple: (inf, (-1, -1)) for fewer than two points
        """

        n = len(self.points)
        if n < 2:
            return float('inf'), (-1, -1)

        if self.group.is_abelian:
            dist, idx = self._tree.query(self.points, k=2)
            row = int(np.argmin(dist[:, 1]))
            other = int(idx[row, 1]) if idx[row, 1] != row else int(idx[row, 0])
            pair = tuple(sorted((row, other)))
            return float(dist[row, 1] / self.group.norm.eta), pair

        best, pair = float('inf'), (-1, -1)
        rows = max(NEAREST_BLOCK // n, 1)
        for part in chunks(n, rows):
            block = self.group.pairwise(self.points[part], self.points)
            block[np.arange(block.shape[0]), np.arange(part.start, part.stop)] = np.inf
            i, j = np.unravel_index(np.argmin(block), block.shape)
            if block[i, j] < best:
                best, pair = float(block[i, j]), tuple(sorted((part.start + int(i), int(j))))

        return best, pair

    def ball_mass(self, center, radii, weights) -> np.ndarray:
        """mu(B(center, r)) for every r in radii, closed balls"""

        radii = np.atleast_1d(np.asarray(radii, dtype=float))
        weights = np.asarray(weights, dtype=float)
        dist = self.distances(center)
        order = np.argsort(dist, kind='stable')
        cum = np.concatenate(([0.0], np.cumsum(weights[order])))
        return cum[np.searchsorted(dist[order], radii, side='right')]
