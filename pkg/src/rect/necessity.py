"""Finiteness of the beta sum along a curve carrying part of a measure"""

import logging
from dataclasses import dataclass

import numpy as np

from beta import BetaEngine, BetaReport
from carnot import CarnotGroup
from config import BetaConfig
from constants import Variant
from cubes import CubeSystem, whitney
from trees import DiscreteMeasure
from tsp import Polyline
from .classify import measure_cubes


log = logging.getLogger(__name__)

SUMMABLE_TOL = 0.01


@dataclass(frozen=True, eq=False)
class NecessityReport:
    """Cumulative sums of beta*(mu, Q)^(2s) diam Q per level

    Attributes:
        levels: the levels summed over
        on_curve: sums over cubes holding an atom of the curve
        off_curve: sums over the other cubes
        length: H^1 of the curve
        curve_mass: mu of the curve atoms
        off_mass: mu of every other atom
        whitney_cubes: size of the Whitney family of the curve atoms
        whitney_mass: mass of the atoms inside that family
    """

    levels: np.ndarray
    on_curve: np.ndarray
    off_curve: np.ndarray
    length: float
    curve_mass: float
    off_mass: float
    whitney_cubes: int = 0
    whitney_mass: float = 0.0

    @property
    def rhs(self) -> float:
        """H^1(curve) + mu(off the curve)"""

        return self.length + self.off_mass

    @property
    def total(self) -> float:
        return float(self.on_curve[-1]) if len(self.on_curve) else 0.0

    @property
    def constant(self) -> float:
        """Smallest C with total <= C rhs"""

        if self.total == 0:
            return 0.0
        return self.total / self.rhs if self.rhs > 0 else float('inf')

    @property
    def ratio(self) -> float:
        """Last partial sum over the one before it"""

        if len(self.on_curve) < 2:
            return 1.0
        last, previous = float(self.on_curve[-1]), float(self.on_curve[-2])
        if previous == 0:
            return 1.0 if last == 0 else float('inf')
        return last / previous

    def summable(self, tol: float=SUMMABLE_TOL) -> bool:
        return self.ratio <= 1 + tol

    def to_dict(self) -> dict:
        return {
            'levels': self.levels.tolist(),
            'on_curve': self.on_curve.tolist(),
            'off_curve': self.off_curve.tolist(),
            'length': self.length,
            'curve_mass': self.curve_mass,
            'off_mass': self.off_mass,
            'rhs': self.rhs,
            'constant': self.constant,
            'ratio': self.ratio,
            'summable': self.summable(),
            'whitney_cubes': self.whitney_cubes,
            'whitney_mass': self.whitney_mass,
        }


def necessity_check(group: CarnotGroup, mu: DiscreteMeasure, curve_atoms, curve: Polyline|None=None,
                    depth: int|None=None, beta_config: BetaConfig|None=None,
                    system: CubeSystem|None=None, report: BetaReport|None=None) -> NecessityReport:
    """Sum beta* over the cubes meeting a curve and compare with its length plus the mass off it

    Args:
        group (CarnotGroup): the group of mu
        mu (DiscreteMeasure): the measure
        curve_atoms (array-like): indices or mask of the atoms declared on the curve
        curve (Polyline, optional): the curve, of length 0 when omitted
        depth (int, optional): K, the resolution of mu by default
        beta_config (BetaConfig): settings of the beta engine
        system (CubeSystem, optional): prebuilt cubes
        report (BetaReport, optional): prebuilt beta records over system

    Returns:
        NecessityReport: a diagnostic, nothing is raised on large sums
    """

    system = system or measure_cubes(group, mu, depth)
    report = report or BetaEngine(mu, system, beta_config).report()

    curve_atoms = np.asarray(curve_atoms)
    on = np.zeros(len(mu), dtype=bool)
    on[curve_atoms] = True

    levels = np.array(report.levels, dtype=int)
    on_curve, off_curve = np.zeros(len(levels)), np.zeros(len(levels))
    running_on = running_off = 0.0
    for i, level in enumerate(levels):
        meets = np.zeros(system.count(level), dtype=bool)
        meets[system.assignment(level)[on]] = True
        for record in report.records:
            if record.cube.level != level:
                continue
            term = record.value(Variant.STAR) ** (2 * record.step) * record.diam
            if meets[record.cube.index]:
                running_on += term
            else:
                running_off += term
        on_curve[i], off_curve[i] = running_on, running_off

    whitney_cubes, whitney_mass = 0, 0.0
    if on.any() and not on.all():
        family = whitney(system, on)
        whitney_cubes = len(family)
        whitney_mass = mu.mass(family.covered(system))

    necessity = NecessityReport(
        levels, on_curve, off_curve,
        length=curve.length if curve is not None else 0.0,
        curve_mass=float(mu.weights[on].sum()),
        off_mass=float(mu.weights[~on].sum()),
        whitney_cubes=whitney_cubes,
        whitney_mass=whitney_mass,
    )
    log.info(
        'Beta sum along the curve %.4g against length plus off mass %.4g (ratio of last sums %.4g)',
        necessity.total, necessity.rhs, necessity.ratio,
    )
    return necessity
