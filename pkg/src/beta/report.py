"""Per-cube beta records, their export and the Jones functions they sum to"""

import csv
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import TextIO

import numpy as np

from carnot import HorizontalLine
from constants import OUTER_RADIUS, Variant
from cubes import Cube, CubeSystem
from errors import GeometryError


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BetaRecord:
    """Every beta variant of one cube

    Attributes:
        cube: the cube Q
        step: s of the group, the variants are stored as beta, not beta^(2s)
        beta_star: anisotropic beta*(mu, Q)
        beta_star_c: beta^{*,c}(mu, Q) for every c of the grid
        beta_star_star: beta**(mu, Q), the max over Near(Q) without density weights
        beta_ball: beta(mu, 2B_Q), the inf over lines on Q's own ball
        line: a line attaining beta*
        lines: lines attaining beta** and beta(mu, 2B_Q)
        near_size: #Near(Q)
        mass: mu(Q)
        diam: diam Q, at least a third of the side
        density: mu(2B_Q) / diam 2B_Q
        candidates: number of lines compared
    """

    cube: Cube
    step: int
    beta_star: float
    beta_star_c: dict[float, float]
    beta_star_star: float
    beta_ball: float
    line: HorizontalLine
    lines: dict[str, HorizontalLine] = field(default_factory=dict)
    near_size: int = 1
    mass: float = 0.0
    diam: float = 0.0
    density: float = 0.0
    candidates: int = 1

    def value(self, variant: Variant, c: float|None=None) -> float:
        """The beta number a Jones variant is built from"""

        match variant:
            case Variant.STAR:
                return self.beta_star
            case Variant.STAR_C:
                if c not in self.beta_star_c:
                    raise ValueError(f'c={c} is not on the grid {sorted(self.beta_star_c)}')
                return self.beta_star_c[c]
            case Variant.STAR_STAR:
                return self.beta_star_star
            case Variant.TILDE:
                return self.beta_ball
        raise ValueError(f'unknown variant: {variant}')

    def term(self, variant: Variant, c: float|None=None) -> float:
        """beta^(2s) diam Q / mu(Q)"""

        return self.value(variant, c) ** (2 * self.step) * self.diam / self.mass

    def to_row(self) -> dict:
        row = {
            'cube': self.cube.id,
            'level': self.cube.level,
            'beta_star': self.beta_star,
            'beta_star_star': self.beta_star_star,
            'beta_ball': self.beta_ball,
        }
        row.update({f'beta_star_c[{c:g}]': value for c, value in self.beta_star_c.items()})
        row.update({
            'near_size': self.near_size,
            'mass': self.mass,
            'diam': self.diam,
            'density': self.density,
        })
        return row

    def to_dict(self) -> dict:
        return {
            'cube': self.cube.id,
            'level': self.cube.level,
            'beta_star': self.beta_star,
            'beta_star_c': {f'{c:g}': value for c, value in self.beta_star_c.items()},
            'beta_star_star': self.beta_star_star,
            'beta_ball': self.beta_ball,
            'line': self.line.to_dict(),
            'near_size': self.near_size,
            'mass': self.mass,
            'diam': self.diam,
            'density': self.density,
            'candidates': self.candidates,
        }


@dataclass(frozen=True)
class BetaReport:
    group: str
    step: int
    c_grid: tuple[float, ...]
    records: tuple[BetaRecord, ...]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @cached_property
    def by_key(self) -> dict[tuple[int, int], BetaRecord]:
        return {record.cube.key: record for record in self.records}

    def get(self, cube: Cube|tuple[int, int]) -> BetaRecord:
        return self.by_key[cube.key if isinstance(cube, Cube) else cube]

    @property
    def levels(self) -> list[int]:
        return sorted({record.cube.level for record in self.records})

    def to_dict(self) -> dict:
        return {
            'group': self.group,
            'step': self.step,
            'c_grid': list(self.c_grid),
            'cubes': [record.to_dict() for record in self.records],
        }

    def to_csv(self, file: TextIO) -> None:
        """One row per cube: id, level, every variant, then Near size and densities"""

        if not self.records:
            return

        rows = [record.to_row() for record in self.records]
        writer = csv.DictWriter(file, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)


def jones_partials(report: BetaReport, system: CubeSystem, variant: Variant,
                   c: float|None=None) -> tuple[np.ndarray, np.ndarray]:
    """Partial sums of a Jones function at every atom, level by level

    Args:
        report (BetaReport): the cube records
        system (CubeSystem): the cubes the report was computed on
        variant (Variant): which beta number to sum
        c (float, optional): the grid value for Variant.STAR_C

    Returns:
        tuple: the levels, and partial sums of shape (levels, atoms) where row
            i sums the cubes of the first i + 1 levels containing the atom
    """

    levels = report.levels
    partial = np.zeros((len(levels), len(system.points)))
    running = np.zeros(len(system.points))
    for i, level in enumerate(levels):
        terms = np.zeros(system.count(level))
        for record in report.records:
            if record.cube.level == level:
                terms[record.cube.index] = record.term(variant, c)
        running = running + terms[system.assignment(level)]
        partial[i] = running
    return np.array(levels, dtype=int), partial


def jones_all(report: BetaReport, system: CubeSystem, variant: Variant, c: float|None=None) -> np.ndarray:
    """The truncated Jones function at every atom"""

    _, partial = jones_partials(report, system, variant, c)
    return partial[-1] if len(partial) else np.zeros(len(system.points))


def jones(report: BetaReport, system: CubeSystem, x, variant: Variant, c: float|None=None) -> float:
    """Truncated Jones function at an atom index or a query point

    Raises:
        GeometryError: the query point is farther from the finest centres
            than the outer radius of the finest cubes
    """

    if np.ndim(x) == 0:
        chain = system.chain(int(x))
    else:
        _, dist = system.center_index(system.k_max).nearest(np.atleast_2d(system.group.coords(x)))
        if dist[0] > OUTER_RADIUS * system.side(system.k_max):
            raise GeometryError('query point lies outside the region covered by the cubes')
        chain = system.cube_of(x)

    return float(sum(report.get(cube).term(variant, c) for cube in chain if cube.key in report.by_key))
