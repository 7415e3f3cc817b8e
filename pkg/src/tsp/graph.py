"""Graphs through a cloud sequence, level by level, with their phantom ledger

Vertices are pairs (k, i) naming the i-th point of V_k and edges are sorted
vertex pairs. Gamma_{k0} is the complete graph on the first cloud with two
or more points. Every later Gamma_k is the union of the local pieces
Gamma_{k,v} over v in V_k and of all bridges of earlier generations. A
bridge spans a large projected gap between two vertices of one cloud and
carries the extensions of both ends, the chains of nearest vertices down to
the last cloud.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from itertools import combinations
from typing import Iterable

import networkx as nx
import numpy as np

from constants import (
    BILIPSCHITZ_LIMIT,
    FLATNESS_EPS,
    GAP_FACTOR,
    LEDGER_BRIDGE_SHARE,
    PHANTOM_FACTOR,
)
from errors import ConstructionError, GeometryError, InvariantViolation
from .clouds import CloudSequence


log = logging.getLogger(__name__)

Vertex = tuple[int, int]
Edge = tuple[Vertex, Vertex]

LEDGER_SLACK = 1e-12


def edge(u: Vertex, v: Vertex) -> Edge:
    return (u, v) if u <= v else (v, u)


def projected_length(seq: CloudSequence, edges: Iterable[Edge]) -> float:
    """Sum over edges (u, v) of |pi(u) - pi(v)|, pi the first layer projection"""

    edges = list(edges)
    if not edges:
        return 0.0

    n1 = seq.group.spec.layer_dims[0]
    a = np.array([seq.point(u)[:n1] for u, _ in edges])
    b = np.array([seq.point(v)[:n1] for _, v in edges])
    return float(np.linalg.norm(a - b, axis=1).sum())


@dataclass(frozen=True)
class Bridge:
    """B[k, v', v''], the span (v', v'') and the extensions of both ends

    Attributes:
        level: k
        ends: indices of v' < v'' in V_k
        extensions: vertex chains starting at v' and at v''
        case: I or II-T2, the rule that created the bridge
    """

    level: int
    ends: tuple[int, int]
    extensions: tuple[tuple[Vertex, ...], tuple[Vertex, ...]]
    case: str = 'I'

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.level, *self.ends)

    @property
    def span(self) -> Edge:
        return edge((self.level, self.ends[0]), (self.level, self.ends[1]))

    @cached_property
    def edges(self) -> frozenset[Edge]:
        out = {self.span}
        for chain in self.extensions:
            out.update(edge(u, v) for u, v in zip(chain, chain[1:]))
        return frozenset(out)

    @property
    def index_set(self) -> frozenset[Vertex]:
        """I[k, v', v''], every pair (k + i, v_i) on either extension"""

        return frozenset(self.extensions[0]) | frozenset(self.extensions[1])

    def to_dict(self) -> dict:
        return {
            'level': self.level,
            'ends': list(self.ends),
            'case': self.case,
            'extensions': [[list(v) for v in chain] for chain in self.extensions],
        }


@dataclass(frozen=True)
class VertexCase:
    """How Gamma_{k,v} was built: Case I, or Case II with a rule per side"""

    level: int
    index: int
    case: str
    left: str|None = None
    right: str|None = None

    @property
    def terminal(self) -> bool:
        return self.left in ('T1', 'T2') or self.right in ('T1', 'T2')

    def to_dict(self) -> dict:
        return {'vertex': [self.level, self.index], 'case': self.case, 'left': self.left, 'right': self.right}


@dataclass(frozen=True)
class LevelGraph:
    """Gamma_k split the way the length accounting needs it

    Attributes:
        level: k
        edges: Edges(k), the pairs of Gamma_k outside every bridge
        bridges: Bridges(k), the bridges created at this level
        carried: bridges of earlier generations, all kept in Gamma_k
        phantom: Phantom(k)
        cases: the rule used at every vertex of V_k (empty at the first level)
    """

    level: int
    edges: frozenset[Edge]
    bridges: tuple[Bridge, ...]
    carried: tuple[Bridge, ...]
    phantom: frozenset[Vertex]
    cases: tuple[VertexCase, ...] = ()

    @cached_property
    def all_edges(self) -> frozenset[Edge]:
        out = set(self.edges)
        for bridge in self.bridges + self.carried:
            out |= bridge.edges
        return frozenset(out)

    @cached_property
    def bridge_edges(self) -> frozenset[Edge]:
        return frozenset().union(*(b.edges for b in self.bridges))


@dataclass(frozen=True)
class BilipschitzReport:
    """Worst d(z', z'') / |pi_{k,v}(z') - pi_{k,v}(z'')| over Case II windows

    Attributes:
        worst: the measured ratio, 1 + C eps^(2s) in the flat estimate
        constant: the implied C
        ties: pairs of distinct points with equal projections
        windows: Case II windows examined
        passed: 2 * worst stays below the limit
    """

    worst: float
    constant: float
    ties: int
    windows: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            'worst': self.worst,
            'constant': self.constant,
            'ties': self.ties,
            'windows': self.windows,
            'passed': self.passed,
        }


@dataclass(frozen=True, eq=False)
class CurveGraph:
    """The graphs Gamma_{k0}..Gamma_m of a fitted cloud sequence

    k0 is None when the last cloud is a single point; the limit set is then
    a point and there is nothing to connect.
    """

    seq: CloudSequence
    eps: float
    k0: int|None
    levels: tuple[LevelGraph, ...]
    bilipschitz: BilipschitzReport|None = None

    def level(self, k: int) -> LevelGraph:
        if self.k0 is None or not self.k0 <= k <= self.seq.m:
            raise GeometryError(f'no graph at level {k}')
        return self.levels[k - self.k0]

    @property
    def final(self) -> LevelGraph|None:
        return self.levels[-1] if self.levels else None

    def phantom_value(self, vertex: Vertex) -> float:
        """p_{j,u} = 3 C* 2^-j r0"""

        return PHANTOM_FACTOR * self.seq.c_star * self.seq.scale(vertex[0])

    def phantom_total(self, k: int) -> float:
        return sum(self.phantom_value(v) for v in self.level(k).phantom)

    def bridge_phantom(self, bridge: Bridge) -> float:
        """Phantom length of I[k, v', v''], 12 C* 2^-k r0 for untruncated extensions"""

        return sum(self.phantom_value(v) for v in bridge.index_set)

    def bridges(self) -> list[Bridge]:
        return [b for level in self.levels for b in level.bridges]

    def projected_length(self, k: int) -> float:
        return projected_length(self.seq, self.level(k).all_edges)

    def to_networkx(self, k: int|None=None) -> nx.Graph:
        """Gamma_k (default: the last one) with edges weighted by group distance

        The nodes are V_k together with every vertex an edge touches.
        """

        k = self.seq.m if k is None else k
        g = nx.Graph()
        g.add_nodes_from((k, i) for i in range(len(self.seq.clouds[k])))
        if self.k0 is None or k < self.k0:
            return g

        group = self.seq.group
        for u, v in sorted(self.level(k).all_edges):
            g.add_edge(u, v, length=float(group.distance(self.seq.point(u), self.seq.point(v))))
        return g

    def to_dict(self) -> dict:
        return {
            'k0': self.k0,
            'eps': self.eps,
            'clouds': self.seq.to_dict(),
            'levels': [
                {
                    'level': lg.level,
                    'edges': [[list(u), list(v)] for u, v in sorted(lg.edges)],
                    'bridges': [b.to_dict() for b in lg.bridges],
                    'carried': [list(b.key) for b in lg.carried],
                    'phantom': [list(v) for v in sorted(lg.phantom)],
                    'cases': [c.to_dict() for c in lg.cases],
                    'projected_length': projected_length(self.seq, lg.all_edges),
                }
                for lg in self.levels
            ],
            'bilipschitz': None if self.bilipschitz is None else self.bilipschitz.to_dict(),
        }


class _Builder:
    """Per level construction of Gamma_{k,v} with cached extensions"""

    def __init__(self, seq: CloudSequence, eps: float):
        self.seq = seq
        self.eps = eps
        self.group = seq.group
        self.n1 = seq.group.spec.layer_dims[0]
        self._next = {}
        self._extensions = {}

    def proj(self, vertex: Vertex) -> np.ndarray:
        return self.seq.point(vertex)[:self.n1]

    def gap(self, u: Vertex, v: Vertex) -> float:
        return float(np.linalg.norm(self.proj(u) - self.proj(v)))

    def extension(self, vertex: Vertex) -> tuple[Vertex, ...]:
        """E[k, v]: v_0 = v, then the closest vertex of the next cloud, lowest index on ties"""

        if vertex not in self._extensions:
            k, i = vertex
            chain = [vertex]
            while k < self.seq.m:
                if k not in self._next:
                    self._next[k] = self.seq.indexes[k + 1].nearest(self.seq.clouds[k])[0]
                i = int(self._next[k][i])
                k += 1
                chain.append((k, i))
            self._extensions[vertex] = tuple(chain)
        return self._extensions[vertex]

    def bridge(self, k: int, a: int, b: int, case: str) -> Bridge:
        a, b = sorted((int(a), int(b)))
        return Bridge(k, (a, b), (self.extension((k, a)), self.extension((k, b))), case)

    def initial(self, k0: int) -> LevelGraph:
        n = len(self.seq.clouds[k0])
        edges = frozenset(edge((k0, a), (k0, b)) for a, b in combinations(range(n), 2))
        return LevelGraph(k0, edges, (), (), frozenset((k0, i) for i in range(n)))

    def _ordered(self, k: int, members: np.ndarray, direction: np.ndarray, side: int) -> np.ndarray:
        """members of V_k sorted along pi_{k,v}, reversed for the left side, ties by index"""

        keys = side * (self.seq.clouds[k][members][:, :self.n1] @ direction)
        return members[np.lexsort((members, keys))]

    def half(self, k: int, i: int, local: np.ndarray, side: int,
             edges: set, bridges: dict, phantom: set) -> str:
        """Gamma^R_{k,v} (side=1) or Gamma^L_{k,v} (side=-1), returns the rule used"""

        seq = self.seq
        c_star = seq.c_star
        v = seq.clouds[k][i]
        direction = seq.lines[k][i].direction
        limit = GAP_FACTOR * c_star * seq.scale(k)

        chain = self._ordered(k, local, direction, side)
        pos = int(np.flatnonzero(chain == i)[0])
        cur = pos
        while cur + 1 < len(chain):
            a, b = (k, int(chain[cur])), (k, int(chain[cur + 1]))
            if self.gap(a, b) >= limit or float(self.group.distance(v, seq.point(b))) > limit:
                break
            edges.add(edge(a, b))
            cur += 1

        if cur > pos:
            return 'NT'

        # terminal on this side: look at how Gamma_{k-1} continues past w_v
        prev_index = seq.indexes[k - 1]
        w_v = int(prev_index.nearest(v)[0][0])
        ring = np.union1d(prev_index.within(v, seq.window(k)), [w_v])
        ordered = self._ordered(k - 1, ring, direction, side)
        ordered = ordered[int(np.flatnonzero(ordered == w_v)[0]):]

        near = np.atleast_1d(prev_index.distances(v, ordered)) <= c_star * seq.scale(k - 1)
        r = int(np.flatnonzero(near)[-1]) if near.any() else 0
        if r == len(ordered) - 1 or self.gap((k - 1, int(ordered[r])), (k - 1, int(ordered[r + 1]))) \
                >= GAP_FACTOR * c_star * seq.scale(k - 1):
            phantom.add((k, i))
            return 'T1'

        if pos + 1 >= len(chain):
            log.warning('Vertex %s of level %s has no neighbour for its terminal bridge; using T1', i, k)
            phantom.add((k, i))
            return 'T1'

        bridge = self.bridge(k, i, int(chain[pos + 1]), 'II-T2')
        bridge = bridges.setdefault(bridge.key, bridge)
        phantom.update(bridge.index_set)
        return 'T2'

    def level(self, k: int, previous: LevelGraph) -> LevelGraph:
        seq = self.seq
        index = seq.indexes[k]
        cloud = seq.clouds[k]
        alphas = seq.alphas[k]
        limit = GAP_FACTOR * seq.c_star * seq.scale(k)

        edges, bridges, added, cases = set(), {}, set(), []
        for i in range(len(cloud)):
            local = index.within(cloud[i], seq.window(k))
            if np.any(alphas[local] >= self.eps):
                for a, b in combinations(local.tolist(), 2):
                    if self.gap((k, a), (k, b)) < limit:
                        edges.add(edge((k, a), (k, b)))
                    else:
                        bridge = self.bridge(k, a, b, 'I')
                        bridge = bridges.setdefault(bridge.key, bridge)
                        added.update(bridge.index_set)
                added.update((k, int(a)) for a in local)
                cases.append(VertexCase(k, i, 'I'))
                continue

            left = self.half(k, i, local, -1, edges, bridges, added)
            right = self.half(k, i, local, 1, edges, bridges, added)
            cases.append(VertexCase(k, i, 'II', left, right))

        new = tuple(bridges[key] for key in sorted(bridges))
        carried = previous.carried + previous.bridges
        covered = frozenset().union(*(b.edges for b in new + carried))

        kept = {v for v in previous.phantom if v[0] not in (k - 1, k)}
        level = LevelGraph(k, frozenset(edges) - covered, new, carried, frozenset(kept | added), tuple(cases))

        log.debug(
            'Level %s: %s edges, %s new bridges, %s carried, %s phantom pairs',
            k, len(level.edges), len(new), len(carried), len(level.phantom),
        )
        return level


def first_level(seq: CloudSequence) -> int|None:
    """Least k0 with #V_k >= 2 for every k >= k0, None when V_m is a point"""

    sizes = seq.sizes()
    if sizes[-1] < 2:
        return None
    k0 = seq.m
    while k0 > 0 and sizes[k0 - 1] >= 2:
        k0 -= 1
    return k0


def check_graph(graph: CurveGraph) -> None:
    """Connectivity, bridge persistence and the phantom properties

    Raises:
        ConstructionError: some Gamma_k is disconnected
        InvariantViolation: a bridge is dropped or a phantom property fails
    """

    seen = []
    for lg in graph.levels:
        if not nx.is_connected(graph.to_networkx(lg.level)):
            raise ConstructionError(f'graph of level {lg.level} is disconnected')

        carried = {b.key for b in lg.carried}
        if any(key not in carried for key in seen):
            raise InvariantViolation(f'a bridge is missing from the graph of level {lg.level}')
        seen.extend(b.key for b in lg.bridges)

        for bridge in lg.bridges:
            if not bridge.index_set <= lg.phantom:
                raise InvariantViolation(f'phantom set of level {lg.level} misses bridge {bridge.key}')

        for case in lg.cases:
            if case.terminal and (case.level, case.index) not in lg.phantom:
                raise InvariantViolation(f'terminal vertex {case.index} of level {lg.level} has no phantom length')


def check_bilipschitz(seq: CloudSequence, graph: CurveGraph, limit: float=BILIPSCHITZ_LIMIT) -> BilipschitzReport:
    """Measure how far pi_{k,v} is from an isometry on every Case II window

    The flat estimate wants d(z', z'') <= (1 + C eps^(2s)) |pi_{k,v}(z') - pi_{k,v}(z'')|
    with 2 (1 + C eps^(2s)) < limit; the worst ratio over all windows plays the
    role of 1 + C eps^(2s).
    """

    group = seq.group
    n1 = group.spec.layer_dims[0]
    worst, ties, windows = 1.0, 0, 0
    for lg in graph.levels:
        k = lg.level
        for case in lg.cases:
            if case.case != 'II':
                continue
            windows += 1
            v = seq.clouds[k][case.index]
            radius = seq.window(k)
            z = np.vstack([
                seq.clouds[k][seq.indexes[k].within(v, radius)],
                seq.clouds[k - 1][seq.indexes[k - 1].within(v, radius)],
            ])
            p = z[:, :n1] @ seq.lines[k][case.index].direction
            dist = group.pairwise(z, z)
            dp = np.abs(p[:, None] - p[None, :])
            distinct = dist > 0
            tied = distinct & (dp == 0)
            ties += int(tied.sum()) // 2
            if tied.any():
                worst = np.inf
            elif distinct.any():
                worst = max(worst, float((dist[distinct] / dp[distinct]).max()))

    constant = 0.0 if worst <= 1 else (worst - 1) / graph.eps ** (2 * group.step)
    report = BilipschitzReport(float(worst), float(constant), ties, windows, bool(2 * worst < limit))
    if not report.passed:
        log.warning(
            'Case II projections are not bi-Lipschitz enough: ratio %.4g, C=%.4g, %s ties',
            report.worst, report.constant, report.ties,
        )
    return report


def build_graphs(seq: CloudSequence, eps: float=FLATNESS_EPS, limit: float=BILIPSCHITZ_LIMIT,
                 check: bool=True) -> CurveGraph:
    """Build Gamma_{k0}..Gamma_m with bridges and the phantom ledger

    Args:
        seq (CloudSequence): clouds with fitted lines and alphas
        eps (float): flatness threshold between Case I and Case II
        limit (float): bound on twice the Case II bi-Lipschitz ratio
        check (bool): verify connectivity and the ledger properties

    Raises:
        GeometryError: the clouds carry no lines
        ConstructionError: a graph is disconnected

    Returns:
        CurveGraph: every level with its bridges and phantom set
    """

    if not seq.fitted:
        raise GeometryError('fit lines to the clouds before building graphs')

    if not eps > 0:
        raise ValueError(f'eps must be positive, got {eps}')

    k0 = first_level(seq)
    if k0 is None:
        log.info('The last cloud is a single point, the curve is trivial')
        return CurveGraph(seq, eps, None, ())

    builder = _Builder(seq, eps)
    levels = [builder.initial(k0)]
    for k in range(k0 + 1, seq.m + 1):
        levels.append(builder.level(k, levels[-1]))

    graph = CurveGraph(seq, eps, k0, tuple(levels))
    if check:
        check_graph(graph)

    graph = replace(graph, bilipschitz=check_bilipschitz(seq, graph, limit))
    log.info(
        'Built graphs of levels %s..%s with %s bridges, final projected length %.4g',
        k0, seq.m, len(graph.bridges()), graph.projected_length(seq.m),
    )
    return graph


@dataclass(frozen=True)
class LedgerRow:
    """Both sides of the per level length inequality, without its constant

    lhs = l(Edges(k)) + l(Bridges(k)) + phantom(k)
    rhs = l(Edges(k-1)) + phantom(k-1) + C sum alpha^(2s) 2^-k r0 + 5/6 l(Bridges(k))
    """

    level: int
    edges: float
    bridges: float
    phantom: float
    previous_edges: float
    previous_phantom: float
    alpha_sum: float
    needed: float

    @property
    def lhs(self) -> float:
        return self.edges + self.bridges + self.phantom

    def to_dict(self) -> dict:
        return {
            'level': self.level,
            'edges': self.edges,
            'bridges': self.bridges,
            'phantom': self.phantom,
            'previous_edges': self.previous_edges,
            'previous_phantom': self.previous_phantom,
            'alpha_sum': self.alpha_sum,
            'needed': self.needed,
        }


@dataclass(frozen=True)
class LedgerReport:
    rows: tuple[LedgerRow, ...]
    constant: float
    phantom_initial: float = 0.0
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.constant))

    def to_dict(self) -> dict:
        return {
            'constant': self.constant,
            'passed': self.passed,
            'phantom_initial': self.phantom_initial,
            'rows': [row.to_dict() for row in self.rows],
            'notes': self.notes,
        }


def ledger_check(graph: CurveGraph) -> LedgerReport:
    """Fit the smallest constant C making the length inequality hold at every level

    A diagnostic: levels whose left side exceeds the right side with no
    alpha mass to charge need C = inf, and the report then fails.
    """

    if graph.k0 is None:
        return LedgerReport((), 0.0, notes=['trivial graph'])

    seq = graph.seq
    power = 2 * seq.group.step
    rows = []
    for previous, lg in zip(graph.levels, graph.levels[1:]):
        k = lg.level
        edges = projected_length(seq, lg.edges)
        bridges = projected_length(seq, lg.bridge_edges)
        phantom = graph.phantom_total(k)
        previous_edges = projected_length(seq, previous.edges)
        previous_phantom = graph.phantom_total(previous.level)
        alpha_sum = float((seq.alphas[k] ** power).sum()) * seq.scale(k)

        rhs = previous_edges + previous_phantom + LEDGER_BRIDGE_SHARE * bridges
        lhs = edges + bridges + phantom
        excess = lhs - rhs
        if excess <= LEDGER_SLACK * max(lhs, 1.0):
            needed = 0.0
        else:
            needed = excess / alpha_sum if alpha_sum > 0 else float('inf')

        rows.append(LedgerRow(k, edges, bridges, phantom, previous_edges, previous_phantom, alpha_sum, needed))

    constant = max((row.needed for row in rows), default=0.0)
    report = LedgerReport(tuple(rows), float(constant), graph.phantom_total(graph.k0))
    log.info('Length ledger constant C = %.4g over %s levels', report.constant, len(rows))
    return report
