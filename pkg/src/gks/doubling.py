"""Empirical doubling of the redistributed measure"""

import logging
from dataclasses import dataclass

import numpy as np

from carnot import GroupIndex
from constants import GKS_DOUBLING_SAMPLES, GKS_NEIGHBOR_FACTOR, GKS_NEIGHBOR_SCAN_LIMIT
from utils import make_rng
from .measure import GksMeasure


log = logging.getLogger(__name__)

RATIO_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class DoublingReport:
    """Ball and neighbour ratios of nu next to those of its base measure

    Attributes:
        delta: weight factor of the construction
        radii: the radii r of the sampled balls B(x, r)
        samples: atoms used as ball centres
        ball_ratio: sup of nu(B(x, 2r)) / nu(B(x, r))
        base_ball_ratio: the same sup for mu
        neighbor_ratio: sup of nu(T) / nu(S) over neighbours in D_n, per generation
        base_neighbor_ratio: the same sup for mu, per generation
        factor_ratio: sup of the ratio of the products of f_k on T and on S
        factor_bound: (C_2 / delta)^2
        truncated: generations whose neighbour scan stopped at the scan limit
    """

    delta: float
    radii: np.ndarray
    samples: np.ndarray
    ball_ratio: float
    base_ball_ratio: float
    neighbor_ratio: dict[int, float]
    base_neighbor_ratio: dict[int, float]
    factor_ratio: float
    factor_bound: float
    truncated: tuple[int, ...] = ()

    @property
    def neighbor_max(self) -> float:
        return max(self.neighbor_ratio.values(), default=1.0)

    @property
    def base_neighbor_max(self) -> float:
        return max(self.base_neighbor_ratio.values(), default=1.0)

    @property
    def neighbor_bound(self) -> float:
        return self.factor_bound * self.base_neighbor_max

    @property
    def within_bound(self) -> bool:
        return self.neighbor_max <= self.neighbor_bound * (1 + RATIO_SLACK)

    def to_dict(self) -> dict:
        return {
            'delta': self.delta,
            'radii': self.radii.tolist(),
            'samples': self.samples.tolist(),
            'ball_ratio': self.ball_ratio,
            'base_ball_ratio': self.base_ball_ratio,
            'neighbor_ratio': {str(n): r for n, r in self.neighbor_ratio.items()},
            'base_neighbor_ratio': {str(n): r for n, r in self.base_neighbor_ratio.items()},
            'factor_ratio': self.factor_ratio,
            'factor_bound': self.factor_bound,
            'neighbor_bound': self.neighbor_bound,
            'within_bound': self.within_bound,
            'truncated': list(self.truncated),
        }


def ball_ratio(index: GroupIndex, centers: np.ndarray, radii: np.ndarray, weights: np.ndarray) -> float:
    """sup over centres and radii of the mass of B(x, 2r) over that of B(x, r)"""

    best = 1.0
    for x in centers:
        small = index.ball_mass(index.points[x], radii, weights)
        large = index.ball_mass(index.points[x], 2 * radii, weights)
        best = max(best, float((large / small).max()))
    return best


def neighbor_ratios(measure: GksMeasure, n: int, limit: int=GKS_NEIGHBOR_SCAN_LIMIT) -> tuple[float, float, float, bool]:
    """Neighbour ratios among the cubes of D_n

    S and T are neighbours when their centres are within
    GKS_NEIGHBOR_FACTOR * side of each other, which implies
    d(S, T) <= GKS_NEIGHBOR_FACTOR * side.

    Returns:
        tuple: sup nu(T)/nu(S), sup mu(T)/mu(S), sup of the factor ratio, and
            whether the scan over S stopped at limit
    """

    system = measure.system
    level = measure.level(n)
    nu = system.masses(level, measure.weights)
    mu = system.masses(level, measure.base.weights)
    factor = nu / mu

    index = system.center_index(level)
    radius = GKS_NEIGHBOR_FACTOR * system.side(level)
    count = system.count(level)
    scan = min(count, limit)
    best = base = factors = 1.0
    for s in range(scan):
        t = index.within(index.points[s], radius)
        best = max(best, float((nu[t] / nu[s]).max()))
        base = max(base, float((mu[t] / mu[s]).max()))
        factors = max(factors, float((factor[t] / factor[s]).max()))
    return best, base, factors, scan < count


def verify_doubling(measure: GksMeasure, samples: int=GKS_DOUBLING_SAMPLES,
                    radius_range: tuple[float, float]|None=None, seed: int|None=None) -> DoublingReport:
    """Sampled doubling ratios and exhaustive same-level neighbour ratios

    Args:
        measure (GksMeasure): the built measure
        samples (int): atoms drawn as ball centres
        radius_range (tuple, optional): smallest and largest r, by default the
            finest and the coarsest side of the cubes
        seed (int, optional): seed of the centre draw

    Returns:
        DoublingReport: a diagnostic, nothing is raised on large ratios
    """

    system = measure.system
    r_min, r_max = radius_range or (system.side(system.k_max), system.side(system.k_min))
    if not 0 < r_min <= r_max:
        raise ValueError(f'bad radius range ({r_min}, {r_max})')
    count = int(np.floor(np.log2(r_max / r_min) + RATIO_SLACK)) + 1
    radii = r_max * 2.0 ** -np.arange(count)

    rng = make_rng(seed)
    size = min(samples, len(measure.base))
    centers = np.sort(rng.choice(len(measure.base), size=size, replace=False))

    index = system.point_index
    ratio = ball_ratio(index, centers, radii, measure.weights)
    base_ratio = ball_ratio(index, centers, radii, measure.base.weights)

    neighbor, base_neighbor, truncated = {}, {}, []
    factor = 1.0
    for n in range(measure.generations + 1):
        best, base, factors, cut = neighbor_ratios(measure, n)
        neighbor[n], base_neighbor[n] = best, base
        factor = max(factor, factors)
        if cut:
            truncated.append(n)
            log.warning('Neighbour scan of D_%s stopped after %s cubes', n, GKS_NEIGHBOR_SCAN_LIMIT)

    report = DoublingReport(
        measure.delta, radii, centers, ratio, base_ratio, neighbor, base_neighbor,
        factor, (measure.c2 / measure.delta) ** 2, tuple(truncated),
    )
    log.info(
        'Doubling of nu %.4g against %.4g for mu; neighbour ratio %.4g against the bound %.4g',
        report.ball_ratio, report.base_ball_ratio, report.neighbor_max, report.neighbor_bound,
    )
    return report
