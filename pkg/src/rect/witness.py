"""Curves carrying the dense part of a measure

Every maximal density tree is pruned to the cubes where the sum of
beta^{*,c}(mu, Q)^(2s) diam Q / mu(Q) stays below N_cap, one atom z_R is
picked in the double ball of every surviving cube, and the atoms of each
level are thinned to separated clouds which the curve builder connects.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from beta import BetaEngine
from carnot import CarnotGroup, GroupIndex, HorizontalLine, beta_tilde_to_line
from config import BetaConfig, TspConfig, WitnessConfig
from constants import CAPTURE_FACTOR, WITNESS_C_STAR
from cubes import Cube, CubeSystem, effective_diam
from errors import ConstructionError, InvariantViolation, LocalizationError
from trees import CubeTree, DiscreteMeasure, LocalizationResult, density_tree, double_ball_densities, leaves, localize
from tsp import CloudReport, CloudSequence, Polyline, build_graphs, fit_cloud_lines, realize_curve, validate_clouds
from .classify import Decomposition, measure_cubes


log = logging.getLogger(__name__)

RATIO_SLACK = 1e-9
DISTANCE_SLACK = 1e-12

CubeKey = tuple[int, int]


@dataclass(frozen=True, eq=False)
class WitnessCurve:
    """A curve built from one density tree, with what it captures

    Attributes:
        c: density threshold of the tree
        top: key of the top cube
        polyline: the curve
        leaf_mass: mu of the density tree leaves
        captured_mass: leaf mass within the finest cloud scale of the curve
        captured_near: leaf mass within CAPTURE_FACTOR times that scale
        localization: the pruned tree and its certificates
        clouds: hypotheses of the cloud sequence
        length_bound: r0 plus the alpha sum of the clouds
        worst_ratio: largest beta~ / beta ratio met by a chosen point, over its bound 2N
    """

    c: float
    top: CubeKey
    polyline: Polyline
    leaf_mass: float
    captured_mass: float
    captured_near: float
    localization: LocalizationResult
    clouds: CloudReport
    length_bound: float
    worst_ratio: float

    @property
    def length(self) -> float:
        return self.polyline.length

    @property
    def capture_fraction(self) -> float:
        return self.captured_mass / self.leaf_mass if self.leaf_mass > 0 else 0.0

    @property
    def retention(self) -> float:
        """mu(A cap Leaves(G)) / mu(A) of the localization"""

        return self.localization.leaf_mass / self.localization.mass_a

    def to_dict(self) -> dict:
        return {
            'c': self.c,
            'top': f'{self.top[0]}:{self.top[1]}',
            'polyline': self.polyline.points.tolist(),
            'length': self.length,
            'captured_mass': self.captured_mass,
            'captured_near': self.captured_near,
            'leaf_mass': self.leaf_mass,
            'capture_fraction': self.capture_fraction,
            'retention': self.retention,
            'length_bound': self.length_bound,
            'worst_ratio': self.worst_ratio,
            'clouds_passed': self.clouds.passed,
        }


@dataclass(frozen=True, eq=False)
class WitnessReport:
    c: float
    curves: tuple[WitnessCurve, ...]
    skipped: tuple[CubeKey, ...]
    qualifying: np.ndarray

    def __len__(self) -> int:
        return len(self.curves)

    @property
    def leaf_mass(self) -> float:
        return float(sum(curve.leaf_mass for curve in self.curves))

    @property
    def captured_mass(self) -> float:
        return float(sum(curve.captured_mass for curve in self.curves))

    @property
    def capture_fraction(self) -> float:
        return self.captured_mass / self.leaf_mass if self.leaf_mass > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            'c': self.c,
            'curves': [curve.to_dict() for curve in self.curves],
            'skipped': [f'{k}:{i}' for k, i in self.skipped],
            'captured_mass': self.captured_mass,
            'capture_fraction': self.capture_fraction,
        }


def density_trees(system: CubeSystem, mu: DiscreteMeasure, c: float) -> list[CubeTree]:
    """Maximal density trees, coarsest tops first

    A cube becomes a top when it is dense and no earlier tree holds it.
    Trees that stop before the finest level have no leaves and are dropped.
    """

    held = {level: np.zeros(system.count(level), dtype=bool) for level in system.levels}
    trees = []
    for level in system.levels:
        dense = double_ball_densities(system, mu, level) >= c
        for index in np.flatnonzero(dense & ~held[level]):
            tree = density_tree(system, system.cube(level, int(index)), mu, c)
            for k, idx in tree.by_level.items():
                held[k][idx] = True
            if leaves(tree).size:
                trees.append(tree)

    log.debug('%s density trees at c = %s', len(trees), c)
    return trees


def qualifying_atoms(system: CubeSystem, mu: DiscreteMeasure, c: float) -> np.ndarray:
    """Atoms that are leaves of some density tree at threshold c"""

    found = [leaves(tree) for tree in density_trees(system, mu, c)]
    return np.unique(np.concatenate(found)) if found else np.array([], dtype=int)


def fit_line(engine: BetaEngine, cube: Cube, c: float) -> tuple[float, HorizontalLine]:
    """beta^{*,c}(mu, Q)^(2s) with a line attaining it

    Without a c-dense cube in Near(Q) the value is 0 and the principal axis
    line of 2B_Q is returned.
    """

    lines = engine.candidates(cube)
    cubes = engine.near(cube)
    dense = [r for r in cubes if engine.densities(r.level)[r.index] >= c]
    if not dense:
        return 0.0, lines[len(lines) - 1]

    worst = (engine.ball_powers(dense, lines) * min(c, 1.0)).max(axis=0)
    best = int(np.argmin(worst))
    return float(worst[best]), lines[best]


def select_points(engine: BetaEngine, tree: CubeTree, lines: dict[CubeKey, HorizontalLine]) -> tuple[dict[CubeKey, int], float]:
    """An atom z_R of 2B_R for every cube R of the tree

    The relevant cubes of R are the tree cubes Q with R in Near(Q), N is
    their number. z_R minimizes the largest ratio beta~(z, l_Q)^(2s) /
    beta(mu, 2B_R, l_Q)^(2s) over relevant Q, ties going to the atom nearest
    x_R. The weighted average of the summed ratios is N, so the minimum
    stays below 2N.

    Raises:
        InvariantViolation: a chosen atom breaks the 2N bound

    Returns:
        tuple: atom index per cube key, and the worst ratio over its bound
    """

    system, group, mu = engine.system, engine.group, engine.mu
    relevant = {key: [] for key in tree.members}
    for q in tree.cubes():
        for r in engine.near(q):
            if r.key in relevant:
                relevant[r.key].append(q.key)

    chosen, worst = {}, 0.0
    for level, idx in tree.by_level.items():
        cubes = [system.cube(level, int(i)) for i in idx]
        keys = sorted({key for cube in cubes for key in relevant[cube.key]})
        column = {key: j for j, key in enumerate(keys)}
        balls = [engine.ball_atoms(cube) for cube in cubes]
        union = np.unique(np.concatenate(balls))
        r = engine.ball_diam(level)

        tilde = np.zeros((len(mu), len(keys)))
        for key, j in column.items():
            tilde[union, j] = beta_tilde_to_line(group, mu.points[union], lines[key], r, engine.config.samples)

        for cube, ball in zip(cubes, balls):
            cols = [column[key] for key in relevant[cube.key]]
            values = tilde[np.ix_(ball, cols)]
            weights = mu.weights[ball]
            beta = weights @ values / weights.sum()
            ratios = np.divide(values, beta, out=np.zeros_like(values), where=beta > 0)
            largest = ratios.max(axis=1)
            dist = np.atleast_1d(group.distance(system.points[cube.center], mu.points[ball]))
            pick = int(np.lexsort((dist, largest))[0])

            bound = 2 * len(cols)
            if largest[pick] > bound * (1 + RATIO_SLACK) + RATIO_SLACK:
                raise InvariantViolation(
                    f'point of cube {cube.id} has ratio {largest[pick]:.6g} above 2N = {bound}'
                )
            chosen[cube.key] = int(ball[pick])
            worst = max(worst, float(largest[pick]) / bound)

    return chosen, worst


def clouds_from_tree(group: CarnotGroup, system: CubeSystem, tree: CubeTree, points: np.ndarray,
                     chosen: dict[CubeKey, int]) -> CloudSequence:
    """V_j: greedy 2^-j r0 separated subsets of the z_Q with Q at level top + j"""

    top = tree.top[0]
    r0 = system.side(top)
    clouds, sources = [], []
    for level, idx in tree.by_level.items():
        scale = r0 * 2.0 ** -(level - top)
        kept = []
        for i in idx:
            atom = chosen[(level, int(i))]
            if not kept or np.atleast_1d(group.distance(points[atom], points[kept])).min() >= scale:
                kept.append(atom)
        clouds.append(points[kept])
        sources.append(np.array(kept, dtype=int))

    return CloudSequence(group, WITNESS_C_STAR, r0, tuple(clouds), sources=tuple(sources))


def _witness(engine: BetaEngine, tree: CubeTree, c: float, config: WitnessConfig,
             tsp: TspConfig) -> WitnessCurve|None:
    system, group, mu = engine.system, engine.group, engine.mu
    fits = {cube.key: fit_line(engine, cube, c) for cube in tree.cubes()}
    b = {key: value * effective_diam(system, system.cube(*key)) for key, (value, _) in fits.items()}
    try:
        result = localize(tree, b, mu, config.n_cap, config.eps_loc)
    except LocalizationError as exc:
        log.warning('Skipping density tree at %s:%s: %s', *tree.top, exc)
        return None

    good = result.tree
    chosen, worst = select_points(engine, good, {key: fits[key][1] for key in good.members})
    seq = clouds_from_tree(group, system, good, mu.points, chosen)
    clouds = validate_clouds(seq, tsp.eps)
    seq = fit_cloud_lines(seq, max_atoms=engine.config.max_atoms)
    polyline = realize_curve(build_graphs(seq, tsp.eps, tsp.bilipschitz_limit))

    tree_leaves = leaves(tree)
    _, dist = GroupIndex(group, polyline.points).nearest(mu.points[tree_leaves])
    weights = mu.weights[tree_leaves]
    radius = seq.scale(seq.m) * (1 + DISTANCE_SLACK)
    curve = WitnessCurve(
        c, tree.top, polyline,
        leaf_mass=float(weights.sum()),
        captured_mass=float(weights[dist <= radius].sum()),
        captured_near=float(weights[dist <= CAPTURE_FACTOR * radius].sum()),
        localization=result,
        clouds=clouds,
        length_bound=seq.length_bound(),
        worst_ratio=worst,
    )
    log.debug(
        'Tree %s:%s: curve of length %.4g captures %.4g of %.4g',
        *tree.top, curve.length, curve.captured_mass, curve.leaf_mass,
    )
    return curve


def build_witness_curves(group: CarnotGroup, mu: DiscreteMeasure, config: WitnessConfig|None=None,
                         depth: int|None=None, beta_config: BetaConfig|None=None,
                         tsp_config: TspConfig|None=None, system: CubeSystem|None=None,
                         engine: BetaEngine|None=None) -> WitnessReport:
    """One curve per maximal density tree of mu at threshold config.c

    Args:
        group (CarnotGroup): the group of mu
        mu (DiscreteMeasure): the measure
        config (WitnessConfig): c, eps_loc and N_cap
        depth (int, optional): K, the resolution of mu by default
        beta_config (BetaConfig): settings of the beta engine, workers spread the trees
        tsp_config (TspConfig): flatness threshold and bi-Lipschitz limit of the curve builder
        system (CubeSystem, optional): prebuilt cubes
        engine (BetaEngine, optional): prebuilt engine over system

    Raises:
        ConstructionError: no density tree reaches the finest level
        LocalizationError: every tree was rejected by localization

    Returns:
        WitnessReport: the curves with their capture statistics
    """

    config = config or WitnessConfig()
    tsp_config = tsp_config or TspConfig()
    system = system or measure_cubes(group, mu, depth)
    engine = engine or BetaEngine(mu, system, beta_config)
    c = config.c

    trees = density_trees(system, mu, c)
    if not trees:
        raise ConstructionError(f'no density tree at c = {c} reaches level {system.k_max}')

    def build(tree):
        return _witness(engine, tree, c, config, tsp_config)

    if engine.config.workers > 1:
        with ThreadPoolExecutor(max_workers=engine.config.workers) as pool:
            results = list(pool.map(build, trees))
    else:
        results = [build(tree) for tree in trees]

    curves = tuple(curve for curve in results if curve is not None)
    skipped = tuple(tree.top for tree, curve in zip(trees, results) if curve is None)
    if not curves:
        raise LocalizationError(f'all {len(trees)} density trees at c = {c} were rejected')

    qualifying = np.unique(np.concatenate([leaves(tree) for tree in trees]))
    report = WitnessReport(c, curves, skipped, qualifying)
    log.info(
        'Built %s witness curves at c = %s capturing %.4g of %.4g leaf mass',
        len(curves), c, report.captured_mass, report.leaf_mass,
    )
    return report


def attach_witnesses(group: CarnotGroup, decomposition: Decomposition, config: WitnessConfig|None=None,
                     beta_config: BetaConfig|None=None, tsp_config: TspConfig|None=None) -> Decomposition:
    """Witness curves for the rectifiable atoms, one run per grid constant present

    The atoms whose largest grid constant is c form one piece and are
    covered by curves of density trees at threshold c. Pieces that admit no
    tree are logged and left without curves.
    """

    config = config or WitnessConfig()
    mu = decomposition.measure
    depth = decomposition.thresholds.get('depth', mu.resolution)
    curves = []
    for c in sorted(set(decomposition.grid_c[decomposition.rect].tolist()) - {0.0}, reverse=True):
        piece = mu.restrict(decomposition.rect & (decomposition.grid_c == c))
        try:
            report = build_witness_curves(group, piece, replace(config, c=c), depth, beta_config, tsp_config)
        except (ConstructionError, LocalizationError) as exc:
            log.warning('No witness curves at c = %s: %s', c, exc)
            continue
        curves.extend(report.curves)

    return replace(decomposition, curves=tuple(curves))
