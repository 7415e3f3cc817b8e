"""Curves through the cubes that keep following centre descendants

K_Q(n, k) holds the cubes S of D_n(Q) that lie in R_T for at least n - k of
the cubes T between Q and S. Round j joins the centre of every cube of
K_Q(n_j, k_j) to x_Q, for every Q found in round j - 1. The union of those
connectors is a tree whose walk carries a fixed fraction of nu(Q_1).
"""

import logging
from dataclasses import dataclass, field
from math import exp
from typing import Callable

import networkx as nx
import numpy as np

from carnot import CarnotGroup
from config import GksSettings
from cubes import Cube, effective_diam
from errors import ConstructionError, InvariantViolation
from tsp import Polyline, tree_walk
from .measure import GksMeasure


log = logging.getLogger(__name__)

BOUND_SLACK = 1e-9
PRODUCT_TAIL = 1e-17

Connector = Callable[[CarnotGroup, np.ndarray, np.ndarray], Polyline]


def straight_connector(group: CarnotGroup, a, b) -> Polyline:
    """The geodesic from a to b as a two vertex polyline"""
    return Polyline(group, np.vstack([a, b]))


def central_hits(measure: GksMeasure, cube: Cube, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Number of centre steps from Q down to every cube of D_{m+n}(Q)

    Returns:
        tuple: indices of the cubes of D_{m+n}(Q) and their hit counts

    Raises:
        ConstructionError: fewer than n generations below Q
    """

    m = measure.generation(cube)
    if n < 0 or m + n > measure.generations:
        raise ConstructionError(f'{n} generations below {cube.id} exceed the {measure.generations} built')

    members = measure.system.members(cube)
    hits = np.zeros(members.size, dtype=int)
    for p in range(m + 1, m + n + 1):
        hits += measure.central_atoms(p)[members]

    owners = measure.system.assignment(measure.level(m + n))[members]
    cubes, first = np.unique(owners, return_index=True)
    return cubes, hits[first]


def family(measure: GksMeasure, cube: Cube, n: int, k: int) -> np.ndarray:
    """Indices of the cubes of K_Q(n, k), at generation m + n"""

    cubes, hits = central_hits(measure, cube, n)
    return cubes[hits >= n - k]


def count_bound(growth: float, n: int, k: int) -> float:
    """(C_5 n / k)^k, 1 for k = 0"""
    return 1.0 if k == 0 else (growth * n / k) ** k


def mass_bound(n: int, k: int, delta: float) -> float:
    """Share of nu(Q) carried by K_Q(n, k) when k >= delta n"""

    if n == 0:
        return 1.0
    return 1 - exp(-(n / 8) * (k / n - delta) ** 2)


@dataclass(frozen=True, eq=False)
class FamilyReport:
    """Every K_Q(n, k), k = 0..n, of one cube

    Attributes:
        cube: Q
        n: generations below Q
        counts: #K_Q(n, k) per k
        masses: nu of the union of K_Q(n, k) per k
        count_bounds: (C_5 n / k)^k per k
        mass_bounds: the concentration bound times nu(Q), nan where k < delta n
    """

    cube: Cube
    n: int
    counts: np.ndarray
    masses: np.ndarray
    count_bounds: np.ndarray
    mass_bounds: np.ndarray

    def to_dict(self) -> dict:
        return {
            'cube': self.cube.id,
            'n': self.n,
            'counts': self.counts.tolist(),
            'masses': self.masses.tolist(),
            'count_bounds': self.count_bounds.tolist(),
            'mass_bounds': [None if np.isnan(b) else float(b) for b in self.mass_bounds],
        }


def check_families(measure: GksMeasure, cube: Cube, n: int) -> FamilyReport:
    """Build K_Q(n, k) for every k and assert their guaranteed properties

    #K_Q(n, 0) = 1, K_Q(n, n) = D_n(Q), the families grow with k, their size
    stays below (C_5 n / k)^k, and for k >= delta n their mass is at least
    the concentration bound.

    Raises:
        InvariantViolation: any of those fails
    """

    system = measure.system
    cubes, hits = central_hits(measure, cube, n)
    level = measure.level(measure.generation(cube) + n)
    nu = system.masses(level, measure.weights)[cubes]
    total = measure.mass(cube)

    if np.count_nonzero(hits == n) != 1:
        raise InvariantViolation(f'{cube.id} has {np.count_nonzero(hits == n)} all-central descendants')
    if not np.array_equal(cubes, system.descendants(cube, level)):
        raise InvariantViolation(f'K(n, n) of {cube.id} is not every descendant')

    counts = np.array([np.count_nonzero(hits >= n - k) for k in range(n + 1)])
    masses = np.array([float(nu[hits >= n - k].sum()) for k in range(n + 1)])
    count_bounds = np.array([count_bound(measure.growth_constant, n, k) for k in range(n + 1)])
    mass_bounds = np.array([
        mass_bound(n, k, measure.delta) * total if k >= measure.delta * n else np.nan
        for k in range(n + 1)
    ])

    if np.any(np.diff(counts) < 0):
        raise InvariantViolation(f'the families of {cube.id} do not grow with k')
    for k in range(n + 1):
        if counts[k] > count_bounds[k] * (1 + BOUND_SLACK):
            raise InvariantViolation(f'#K({n}, {k}) = {counts[k]} of {cube.id} exceeds {count_bounds[k]:.4g}')
        if not np.isnan(mass_bounds[k]) and masses[k] < mass_bounds[k] * (1 - BOUND_SLACK):
            raise InvariantViolation(f'K({n}, {k}) of {cube.id} carries {masses[k]:.4g} < {mass_bounds[k]:.4g}')

    return FamilyReport(cube, n, counts, masses, count_bounds, mass_bounds)


def capture_product(n1: int, delta: float, rounds: int|None=None) -> float:
    """prod over i of 1 - exp(-i n1 delta^2 / 8), to rounds or until the terms stop mattering"""

    product, i = 1.0, 1
    while rounds is None or i <= rounds:
        tail = exp(-i * n1 * delta ** 2 / 8)
        product *= 1 - tail
        if rounds is None and tail < PRODUCT_TAIL:
            break
        i += 1
    return product


def first_round_size(delta: float, n1: int) -> int:
    """k_1 = 2 delta n_1

    Raises:
        ValueError: k_1 is not a positive integer
    """

    k1 = 2 * delta * n1
    if n1 < 1 or round(k1) < 1 or abs(k1 - round(k1)) > BOUND_SLACK:
        raise ValueError(f'k1 = 2 delta n1 = {k1:.6g} must be a positive integer')
    return int(round(k1))


def available_rounds(measure: GksMeasure, cube: Cube, n1: int, wanted: int) -> int:
    """Largest j <= wanted with n_1 + .. + n_j generations below the cube"""

    room = measure.generations - measure.generation(cube)
    rounds = 0
    while rounds < wanted and n1 * (rounds + 1) * (rounds + 2) // 2 <= room:
        rounds += 1
    return rounds


@dataclass(frozen=True, eq=False)
class GksCurve:
    """The connector tree of one cube and what it captures

    Attributes:
        cube: Q_1
        tree: cube keys joined by connector edges carrying length and path
        polyline: a walk through the tree along its connectors
        counts: #K_j per round
        count_bounds: (C_5 / 2 delta)^(k_1 + .. + k_j) per round
        atoms: atoms inside the cubes of the deepest round
        captured_mass: nu of those atoms
        root_mass: nu(Q_1)
        truncated: prod over the realized rounds of 1 - exp(-n_i delta^2 / 8)
        infinite: the same product over every round
        target: the product the capture is held to
        length: total connector length
        qc: largest connector length over the distance it spans
        diam: diameter of Q_1
    """

    cube: Cube
    tree: nx.Graph
    polyline: Polyline
    counts: tuple[int, ...]
    count_bounds: tuple[float, ...]
    atoms: np.ndarray
    captured_mass: float
    root_mass: float
    truncated: float
    infinite: float
    target: float
    length: float
    qc: float
    diam: float
    families: tuple[FamilyReport, ...] = field(default=(), repr=False)

    @property
    def rounds(self) -> int:
        return len(self.counts)

    @property
    def capture_fraction(self) -> float:
        return self.captured_mass / self.root_mass

    @property
    def meets_target(self) -> bool:
        return self.capture_fraction >= self.target * (1 - BOUND_SLACK)

    @property
    def length_constant(self) -> float:
        """length / (C_qc diam Q_1)"""
        return self.length / (self.qc * self.diam)

    def to_dict(self) -> dict:
        return {
            'cube': self.cube.id,
            'rounds': self.rounds,
            'counts': list(self.counts),
            'count_bounds': list(self.count_bounds),
            'captured_mass': self.captured_mass,
            'root_mass': self.root_mass,
            'capture_fraction': self.capture_fraction,
            'truncated_product': self.truncated,
            'infinite_product': self.infinite,
            'target': self.target,
            'meets_target': self.meets_target,
            'length': self.length,
            'qc': self.qc,
            'diam': self.diam,
            'length_constant': self.length_constant,
            'polyline': self.polyline.to_dict(),
        }


def _walk_points(tree: nx.Graph, walk: list) -> np.ndarray:
    points = [tree.nodes[walk[0]]['point'][None, :]]
    for u, v in zip(walk[:-1], walk[1:]):
        path, start = tree.edges[u, v]['path'], tree.edges[u, v]['start']
        pts = path.points if start == u else path.points[::-1]
        points.append(pts[1:])
    return np.vstack(points)


def build_curve(measure: GksMeasure, cube: Cube, settings: GksSettings|None=None,
                connector: Connector|None=None, min_rounds: int=2) -> GksCurve:
    """Join every cube of K_1, .., K_J to the cube it was found from

    Round j uses n_j = j n_1 and k_j = j k_1, so that k_j / n_j = 2 delta.

    Args:
        measure (GksMeasure): the built measure
        cube (Cube): Q_1, a cube of some generation
        settings (GksSettings): delta, n_1 and the wanted number of rounds
        connector (callable, optional): (group, a, b) -> Polyline from a to b,
            straight geodesic segments by default
        min_rounds (int): fewest rounds the depth below Q_1 must admit

    Raises:
        ValueError: 2 delta n_1 is not a positive integer
        ConstructionError: not enough generations below Q_1
        InvariantViolation: a family breaks its count or mass bound

    Returns:
        GksCurve: the tree, its walk and the captured mass
    """

    settings = settings or GksSettings()
    connector = connector or straight_connector
    system = measure.system
    group = system.group
    delta, n1 = measure.delta, settings.n1
    k1 = first_round_size(delta, n1)

    rounds = available_rounds(measure, cube, n1, max(settings.rounds, min_rounds))
    if rounds < min_rounds:
        raise ConstructionError(
            f'{cube.id} leaves {measure.generations - measure.generation(cube)} generations, '
            f'{min_rounds} rounds with n1 = {n1} need {n1 * min_rounds * (min_rounds + 1) // 2}'
        )

    tree = nx.Graph()
    tree.add_node(cube.key, point=system.points[cube.center])
    current, counts, bounds, reports = [cube], [], [], []
    qc, exponent = 1.0, 0
    for j in range(1, rounds + 1):
        n, k = j * n1, j * k1
        exponent += k
        found = []
        for q in current:
            report = check_families(measure, q, n)
            reports.append(report)
            level = q.level + measure.skip * n
            for s in family(measure, q, n, k):
                child = system.cube(level, s)
                a, b = system.points[q.center], system.points[child.center]
                path = connector(group, a, b)
                span = float(group.distance(a, b))
                if span > 0:
                    qc = max(qc, path.length / span)
                tree.add_node(child.key, point=b)
                tree.add_edge(q.key, child.key, length=path.length, path=path, start=q.key)
                found.append(child)

        counts.append(len(found))
        bounds.append((measure.growth_constant / (2 * delta)) ** exponent)
        if counts[-1] > bounds[-1] * (1 + BOUND_SLACK):
            raise InvariantViolation(f'round {j} below {cube.id} found {counts[-1]} cubes, above {bounds[-1]:.4g}')
        current = found

    atoms = np.concatenate([system.members(s) for s in current])
    walk = tree_walk(tree, cube.key)
    points = _walk_points(tree, walk)
    # vertices only when every connector is a single geodesic
    polyline = Polyline(group, points, tuple(walk) if len(points) == len(walk) else ())

    truncated = capture_product(n1, delta, rounds)
    infinite = capture_product(n1, delta)
    curve = GksCurve(
        cube, tree, polyline, tuple(counts), tuple(bounds),
        np.sort(atoms),
        captured_mass=float(measure.weights[atoms].sum()),
        root_mass=measure.mass(cube),
        truncated=truncated,
        infinite=infinite,
        target=infinite if settings.infinite_product else truncated,
        length=float(sum(d for _, _, d in tree.edges(data='length'))),
        qc=qc,
        diam=effective_diam(system, cube),
        families=tuple(reports),
    )
    log.info(
        'Curve below %s: %s rounds, %s cubes, captured %.4g of nu(Q) against %.4g, length %.4g',
        cube.id, rounds, counts[-1], curve.capture_fraction, curve.target, curve.length,
    )
    return curve


@dataclass(frozen=True, eq=False)
class CoverReport:
    """Curves over the uncaptured descendants, one generation deeper each round

    Attributes:
        cube: Q_0
        curves: every curve built, in order
        fractions: cumulative captured share of nu(Q_0) after each round
        atoms: every captured atom
    """

    cube: Cube
    curves: tuple[GksCurve, ...]
    fractions: tuple[float, ...]
    atoms: np.ndarray

    def to_dict(self) -> dict:
        return {
            'cube': self.cube.id,
            'fractions': list(self.fractions),
            'curves': [curve.to_dict() for curve in self.curves],
        }


def cover(measure: GksMeasure, cube: Cube, settings: GksSettings|None=None,
          connector: Connector|None=None, max_rounds: int|None=None) -> CoverReport:
    """Exhaust nu(Q_0) by curves over the descendants still missed

    Round r builds a curve below every cube of generation m + r under Q_0
    that holds an uncaptured atom, as long as one round of families fits.

    Raises:
        ConstructionError: not even Q_0 admits one round
    """

    settings = settings or GksSettings()
    system = measure.system
    m = measure.generation(cube)
    members = system.members(cube)
    captured = np.zeros(len(measure.base), dtype=bool)
    total = measure.mass(cube)

    curves, fractions = [], []
    g = m
    while g + settings.n1 <= measure.generations and (max_rounds is None or len(fractions) < max_rounds):
        if g == m:
            starts = [cube]
        else:
            level = measure.level(g)
            missed = np.unique(system.assignment(level)[members[~captured[members]]])
            starts = [system.cube(level, i) for i in missed]
        if not starts:
            break

        for start in starts:
            curve = build_curve(measure, start, settings, connector, min_rounds=1)
            captured[curve.atoms] = True
            curves.append(curve)
        fractions.append(float(measure.weights[members[captured[members]]].sum()) / total)
        log.debug('Cover round %s: %s curves, %.4g of nu(Q) captured', len(fractions), len(starts), fractions[-1])
        g += 1

    if not curves:
        raise ConstructionError(f'{cube.id} does not admit a single round of families')

    log.info('Covered %.4g of nu(%s) with %s curves in %s rounds', fractions[-1], cube.id, len(curves), len(fractions))
    return CoverReport(cube, tuple(curves), tuple(fractions), np.flatnonzero(captured))
