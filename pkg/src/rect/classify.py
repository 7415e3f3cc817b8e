"""Splitting a discrete measure into its rectifiable and purely unrectifiable parts

An atom is rectifiable when its lower density stays above a threshold at
every available scale and the partial sums of its Jones function stop
growing over the deepest levels. Divergence is read off the least squares
slope of the partial sums, compared against a fraction of the typical
shallow increment so that the test does not depend on the size of the data.
"""

import csv
import logging
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from beta import BetaEngine, BetaReport, jones_partials, lower_densities, upper_doublings
from carnot import CarnotGroup
from config import BetaConfig, ClassifyConfig
from constants import MIN_CLASSIFY_DEPTH, Label, Variant
from cubes import CubeSystem, build_cubes, build_nets
from errors import ConstructionError, SpecError
from trees import DiscreteMeasure
from utils import fit_slope


log = logging.getLogger(__name__)

CRITERIA = {
    'density': Variant.STAR,
    'all-cubes': Variant.STAR_STAR,
    'doubling': Variant.TILDE,
}


def measure_cubes(group: CarnotGroup, mu: DiscreteMeasure, depth: int|None=None) -> CubeSystem:
    """Cubes of levels 0..K over the atoms of mu, K the resolution by default"""

    if group.spec != mu.spec:
        raise SpecError(f'measure lives in {mu.spec.name}, not in {group.spec.name}')

    depth = mu.resolution if depth is None else depth
    return build_cubes(group, mu.points, build_nets(group, mu.points, 0, depth))


@dataclass(frozen=True, eq=False)
class Decomposition:
    """Per atom classification of a measure

    Attributes:
        measure: the classified measure
        criterion: density, all-cubes or doubling
        levels: levels of the Jones partial sums
        partials: partial sums, shape (levels, atoms)
        density: lower density surrogate per atom
        slopes: divergence slope per atom over the deepest levels
        grid_c: largest grid c with density > 2c per atom, 0 where none
        rect: mask of the atoms labelled rectifiable
        thresholds: every threshold the labels were decided with
        doubling: upper doubling per atom, doubling criterion only
        curves: witness curves of the rectifiable part, when built
    """

    measure: DiscreteMeasure
    criterion: str
    levels: np.ndarray
    partials: np.ndarray
    density: np.ndarray
    slopes: np.ndarray
    grid_c: np.ndarray
    rect: np.ndarray
    thresholds: dict = field(default_factory=dict)
    doubling: np.ndarray|None = None
    curves: tuple = ()

    @property
    def labels(self) -> list[Label]:
        return [Label.RECT if flag else Label.PURE for flag in self.rect]

    @property
    def rect_mass(self) -> float:
        return float(self.measure.weights[self.rect].sum())

    @property
    def pure_mass(self) -> float:
        return float(self.measure.weights[~self.rect].sum())

    @property
    def rect_fraction(self) -> float:
        return self.rect_mass / self.measure.total_mass

    @property
    def pure_fraction(self) -> float:
        return self.pure_mass / self.measure.total_mass

    def part(self, label: Label) -> DiscreteMeasure:
        """mu_rect or mu_pure

        Raises:
            GeometryError: the part has no atoms
        """

        return self.measure.restrict(self.rect if label is Label.RECT else ~self.rect)

    def to_dict(self) -> dict:
        return {
            'measure': self.measure.name,
            'criterion': self.criterion,
            'thresholds': self.thresholds,
            'levels': self.levels.tolist(),
            'rect_mass': self.rect_mass,
            'pure_mass': self.pure_mass,
            'atoms': [
                {
                    'coords': self.measure.points[j].tolist(),
                    'weight': float(self.measure.weights[j]),
                    'density': float(self.density[j]),
                    'grid_c': float(self.grid_c[j]),
                    'jones_partials': self.partials[:, j].tolist(),
                    'slope': float(self.slopes[j]),
                    'label': 'rect' if self.rect[j] else 'pure',
                }
                for j in range(len(self.measure))
            ],
            'curves': [curve.to_dict() for curve in self.curves],
        }

    def to_csv(self, file: TextIO) -> None:
        """Coordinates, weight and label of every atom"""

        columns = [f'x{j}' for j in range(self.measure.points.shape[1])]
        writer = csv.writer(file)
        writer.writerow([*columns, 'weight', 'label'])
        for point, weight, flag in zip(self.measure.points, self.measure.weights, self.rect):
            writer.writerow([*point.tolist(), float(weight), 'rect' if flag else 'pure'])


def slope_threshold(levels: np.ndarray, partials: np.ndarray, fraction: float, floor: float) -> float:
    """fraction of the median level-1 increment, never below floor"""

    if len(levels) < 2:
        return floor
    increments = partials[1] - partials[0]
    finite = increments[np.isfinite(increments)]
    reference = float(np.median(finite)) if finite.size else 0.0
    return max(fraction * reference, floor)


def grid_constants(density: np.ndarray, grid) -> np.ndarray:
    """Largest c of the grid with density > 2c, 0 where no c qualifies"""

    out = np.zeros(len(density))
    for c in sorted(grid):
        out[density > 2 * c] = c
    return out


def classify(group: CarnotGroup, mu: DiscreteMeasure, depth: int|None=None,
             config: ClassifyConfig|None=None, beta_config: BetaConfig|None=None,
             system: CubeSystem|None=None, report: BetaReport|None=None) -> Decomposition:
    """Label every atom rect or pure

    Args:
        group (CarnotGroup): the group of mu, with its norm
        mu (DiscreteMeasure): the measure
        depth (int, optional): K, the resolution of mu by default
        config (ClassifyConfig): criterion and thresholds
        beta_config (BetaConfig): settings of the beta engine
        system (CubeSystem, optional): prebuilt cubes of levels 0..K
        report (BetaReport, optional): prebuilt beta records over system

    Raises:
        ConstructionError: fewer than four levels to estimate divergence from
        ValueError: unknown criterion

    Returns:
        Decomposition: labels, densities and partial sums
    """

    config = config or ClassifyConfig()
    beta_config = beta_config or BetaConfig()
    depth = mu.resolution if depth is None else depth
    if depth < MIN_CLASSIFY_DEPTH:
        raise ConstructionError(f'classification needs depth {MIN_CLASSIFY_DEPTH} or more, got {depth}')

    if config.criterion not in CRITERIA:
        raise ValueError(f'unknown classification criterion: {config.criterion}')

    system = system or measure_cubes(group, mu, depth)
    report = report or BetaEngine(mu, system, beta_config).report()
    levels, partials = jones_partials(report, system, CRITERIA[config.criterion])

    window = max(depth // 2, 2)
    slopes = fit_slope(levels[-window:], partials[-window:])
    slope_max = slope_threshold(levels, partials, config.slope_fraction, config.slope_floor)

    density = lower_densities(group, mu, depth)
    doubling = None
    flat = slopes < slope_max
    match config.criterion:
        case 'density':
            rect = (density > config.density_min) & flat
        case 'all-cubes':
            rect = flat
        case 'doubling':
            doubling = upper_doublings(group, mu, depth)
            rect = (doubling <= config.doubling_max) & flat

    thresholds = {
        'density_min': config.density_min,
        'slope_max': slope_max,
        'slope_fraction': config.slope_fraction,
        'slope_floor': config.slope_floor,
        'doubling_max': config.doubling_max,
        'window': int(window),
        'depth': int(depth),
    }
    decomposition = Decomposition(
        mu, config.criterion, levels, partials, density, slopes,
        grid_constants(density, beta_config.c_grid), rect, thresholds, doubling,
    )
    log.info(
        'Classified %s atoms of %s by %s: rect mass %.4g, pure mass %.4g (slope threshold %.3g)',
        len(mu), mu.name, config.criterion, decomposition.rect_mass, decomposition.pure_mass, slope_max,
    )
    return decomposition
