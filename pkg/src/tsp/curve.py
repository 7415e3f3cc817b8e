"""A walk through the final graph, realized as a polyline of group points

Edges are never drawn as geodesics: every edge (u, v) contributes d(u, v),
the length of any geodesic joining its ends, and the polyline is the
sequence of visited vertices.
"""

import csv
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import TextIO

import networkx as nx
import numpy as np

from carnot import CarnotGroup, GroupIndex
from errors import ConstructionError, GeometryError, InvariantViolation
from .graph import CurveGraph, Vertex


log = logging.getLogger(__name__)

LENGTH_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class Polyline:
    """An ordered list of group points joined by geodesics

    Attributes:
        group: ambient group
        points: vertices in walk order, shape (n, N)
        vertices: the graph vertex (k, i) behind every point, if known
    """

    group: CarnotGroup
    points: np.ndarray
    vertices: tuple[Vertex, ...] = ()

    def __post_init__(self):
        points = np.atleast_2d(self.group.coords(np.asarray(self.points, dtype=float)))
        if len(points) == 0:
            raise GeometryError('a polyline needs at least one vertex')
        if self.vertices and len(self.vertices) != len(points):
            raise GeometryError('one graph vertex per polyline point is required')
        object.__setattr__(self, 'points', points)

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def segment_lengths(self) -> np.ndarray:
        if len(self.points) < 2:
            return np.zeros(0)
        return np.atleast_1d(self.group.distance(self.points[:-1], self.points[1:]))

    @property
    def length(self) -> float:
        return float(self.segment_lengths.sum())

    def gap(self, points) -> float:
        """Largest distance from the given points to the nearest polyline vertex"""

        _, dist = GroupIndex(self.group, self.points).nearest(points)
        return float(dist.max()) if dist.size else 0.0

    def sample_path(self, per_segment: int=16) -> np.ndarray:
        """Straight segments in coordinates, only meaningful in abelian groups

        Raises:
            GeometryError: the group is not abelian
        """

        if not self.group.is_abelian:
            raise GeometryError('coordinate paths are geodesics only in abelian groups')

        if len(self.points) < 2:
            return self.points.copy()
        t = np.linspace(0, 1, per_segment, endpoint=False)[:, None, None]
        a, b = self.points[:-1], self.points[1:]
        path = (a + t * (b - a)).transpose(1, 0, 2).reshape(-1, self.points.shape[1])
        return np.vstack([path, self.points[-1:]])

    def to_dict(self) -> dict:
        return {
            'group': self.group.spec.name,
            'points': self.points.tolist(),
            'vertices': [list(v) for v in self.vertices],
            'length': self.length,
        }

    def to_csv(self, file: TextIO) -> None:
        """One vertex per row: position, graph vertex, then coordinates"""

        columns = [f'x{j}' for j in range(self.points.shape[1])]
        writer = csv.writer(file)
        writer.writerow(['index', 'level', 'vertex', *columns])
        for n, point in enumerate(self.points):
            level, vertex = self.vertices[n] if self.vertices else ('', '')
            writer.writerow([n, level, vertex, *point.tolist()])


def tree_walk(tree: nx.Graph, start) -> list:
    """Open walk through every node of a tree along doubled edges

    Children are visited lightest branch first and the walk never comes back
    along the heaviest branch below start, so it ends at the bottom of that
    branch. A path walked from one end is walked exactly once.
    """

    order = list(nx.dfs_preorder_nodes(tree, start))
    parent = {start: None, **dict(nx.dfs_predecessors(tree, start))}
    height = {}
    for node in reversed(order):
        height[node] = max(
            (tree.edges[node, c]['length'] + height[c] for c in tree.neighbors(node) if c != parent[node]),
            default=0.0,
        )

    walk = []
    stack = [('visit', start, True)]
    while stack:
        entry = stack.pop()
        if entry[0] == 'back':
            walk.append(entry[1])
            continue

        _, node, is_open = entry
        walk.append(node)
        children = sorted(
            (c for c in tree.neighbors(node) if c != parent[node]),
            key=lambda c: (tree.edges[node, c]['length'] + height[c], c),
        )
        for n in reversed(range(len(children))):
            final = is_open and n == len(children) - 1
            if not final:
                stack.append(('back', node))
            stack.append(('visit', children[n], final))
    return walk


def realize_curve(graph: CurveGraph) -> Polyline:
    """Walk the last graph along a doubled spanning tree

    The walk starts at an end of a longest branch of the minimum spanning
    tree of Gamma_m (weights d(u, v)) and never returns along its final
    branch, so a path is walked once end to end. Its length is at most
    twice the tree weight, hence at most twice the total edge length.

    Raises:
        ConstructionError: the final graph is disconnected
        InvariantViolation: the walk misses a vertex or breaks the length bound

    Returns:
        Polyline: the walk, visiting every vertex of the last cloud
    """

    seq = graph.seq
    g = graph.to_networkx()
    if not nx.is_connected(g):
        raise ConstructionError('the final graph is disconnected')

    tree = nx.minimum_spanning_tree(g, weight='length')
    root = min(tree.nodes)
    far = nx.single_source_dijkstra_path_length(tree, root, weight='length')
    start = min(far, key=lambda v: (-far[v], v))
    walk = tree_walk(tree, start)

    polyline = Polyline(seq.group, np.array([seq.point(v) for v in walk]), tuple(walk))
    total = sum(d for _, _, d in g.edges(data='length'))
    if set(walk) != set(g.nodes):
        raise InvariantViolation('the walk misses a vertex of the final graph')
    if polyline.length > 2 * total * (1 + LENGTH_SLACK) + LENGTH_SLACK:
        raise InvariantViolation(f'walk length {polyline.length} exceeds twice the edge length {total}')

    bound = seq.length_bound()
    log.info(
        'Curve through %s vertices: length %.4g, certified bound %.4g, C_impl %.4g',
        len(g), polyline.length, bound, polyline.length / bound,
    )
    return polyline
