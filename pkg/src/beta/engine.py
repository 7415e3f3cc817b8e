"""Beta numbers of a discrete measure over its cube system

For a cube Q every variant is an inf over lines of some max over the cubes
R of Near(Q) of beta(mu, 2B_R, L)^(2s), so a single matrix of those values
over (R, candidate line) yields all of them. The matrix is filled level by
level: Near(Q) only holds cubes of two levels and the ball scale diam 2B_R
depends on the level alone, so beta~ is computed once per atom and line.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from carnot import CarnotGroup, HorizontalLine, beta_tilde_to_line
from config import BetaConfig
from constants import DOUBLE_BALL_DIAM, DOUBLE_BALL_RADIUS, PROFILE_SAMPLES
from cubes import Cube, CubeSystem, effective_diam, near
from errors import GeometryError, SpecError
from trees import DiscreteMeasure
from utils import humanize_number
from .candidates import LineCandidateSet, line_candidates, refine_line
from .report import BetaRecord, BetaReport


log = logging.getLogger(__name__)


def beta_integral(group: CarnotGroup, points, weights, line: HorizontalLine, diam: float,
                  samples: int=PROFILE_SAMPLES) -> float:
    """beta(mu, region, L) with beta^(2s) = sum of w beta~(z, L; diam)^(2s) / mu(region)

    Args:
        group (CarnotGroup): ambient group
        points (array-like): atoms of the region
        weights (array-like): their masses
        line (HorizontalLine): the line
        diam (float): the diameter normalizing the region

    Raises:
        GeometryError: diam is not positive

    Returns:
        float: the beta number, 0 for a region without mass
    """

    if not diam > 0:
        raise GeometryError(f'region diameter must be positive, got {diam}')

    weights = np.asarray(weights, dtype=float).reshape(-1)
    mass = weights.sum()
    if mass <= 0:
        log.debug('beta of a massless region is taken as 0')
        return 0.0

    tilde = beta_tilde_to_line(group, points, line, diam, samples)
    return float((weights @ tilde / mass) ** (1.0 / (2 * group.step)))


class BetaEngine:
    """Per-cube beta numbers of one measure over one cube system

    Args:
        mu (DiscreteMeasure): the measure, its atoms are the system sample
        system (CubeSystem): cubes over the atoms
        config (BetaConfig): candidate, refinement and parallelism settings

    Raises:
        SpecError: the measure and the system disagree on the atoms
    """

    def __init__(self, mu: DiscreteMeasure, system: CubeSystem, config: BetaConfig|None=None):
        if len(mu) != len(system.points) or not np.array_equal(mu.points, system.points):
            raise SpecError('the measure and the cube system must share their atoms')

        self.mu = mu
        self.system = system
        self.group = system.group
        self.config = config or BetaConfig()
        self._near = {}
        self._ball_masses = {}

    def __repr__(self) -> str:
        return f'BetaEngine({self.mu.name}, {self.system!r})'

    @property
    def power(self) -> int:
        return 2 * self.group.step

    def ball_atoms(self, cube: Cube) -> np.ndarray:
        """Atoms of 2B_Q = B(x_Q, (16/3) side Q)"""

        balls = self.system.ball_members(cube.level, DOUBLE_BALL_RADIUS)
        return balls.indices[balls.indptr[cube.index]:balls.indptr[cube.index + 1]]

    def ball_masses(self, level: int) -> np.ndarray:
        """mu(2B_R) over the cubes of a level"""

        if level not in self._ball_masses:
            self._ball_masses[level] = self.system.ball_members(level, DOUBLE_BALL_RADIUS) @ self.mu.weights
        return self._ball_masses[level]

    def ball_diam(self, level: int) -> float:
        """diam 2B_R, fixed to the ball diameter so densities only depend on masses"""

        return DOUBLE_BALL_DIAM * self.system.side(level)

    def densities(self, level: int) -> np.ndarray:
        """mu(2B_R) / diam 2B_R over the cubes of a level"""

        return self.ball_masses(level) / self.ball_diam(level)

    def near(self, cube: Cube) -> list[Cube]:
        if cube.key not in self._near:
            self._near[cube.key] = near(self.system, cube, self.config.near_factor)
        return self._near[cube.key]

    def candidates(self, cube: Cube) -> LineCandidateSet:
        """Candidate lines from the atoms of 2B_Q"""

        idx = self.ball_atoms(cube)
        return line_candidates(self.group, self.mu.points[idx], self.mu.weights[idx], self.config.max_atoms)

    def beta_integral(self, cube: Cube, line: HorizontalLine, ball: bool=False) -> float:
        """beta(mu, Q, L), or beta(mu, 2B_Q, L) when ball is set"""

        if ball:
            idx, diam = self.ball_atoms(cube), self.ball_diam(cube.level)
        else:
            idx, diam = self.system.members(cube), effective_diam(self.system, cube)
        return beta_integral(self.group, self.mu.points[idx], self.mu.weights[idx], line, diam, self.config.samples)

    def ball_powers(self, cubes: list[Cube], lines) -> np.ndarray:
        """beta(mu, 2B_R, L)^(2s) for every cube R and line L

        Returns:
            np.ndarray: shape (len(cubes), len(lines))
        """

        lines = list(lines)
        points, weights = self.mu.points, self.mu.weights
        out = np.zeros((len(cubes), len(lines)))
        levels = np.array([c.level for c in cubes])
        for level in np.unique(levels):
            pos = np.flatnonzero(levels == level)
            rows = np.array([cubes[p].index for p in pos])
            balls = self.system.ball_members(int(level), DOUBLE_BALL_RADIUS)[rows]
            union = np.unique(balls.indices)
            r = self.ball_diam(int(level))

            weighted = np.zeros((len(points), len(lines)))
            for j, line in enumerate(lines):
                tilde = beta_tilde_to_line(self.group, points[union], line, r, self.config.samples)
                weighted[union, j] = weights[union] * tilde

            out[pos] = (balls @ weighted) / self.ball_masses(int(level))[rows][:, None]
        return out

    def _variants(self, powers: np.ndarray, dens: np.ndarray, own: int) -> dict:
        """Objective of every variant per line, as 2s-th powers"""

        values = {
            'star': (powers * np.minimum(1.0, dens)[:, None]).max(axis=0),
            'star_star': powers.max(axis=0),
            'ball': powers[own],
        }
        for c in self.config.c_grid:
            dense = dens >= c
            if dense.any():
                values[c] = (powers[dense] * min(c, 1.0)).max(axis=0)
            else:
                values[c] = np.zeros(powers.shape[1])
        return values

    def record(self, cube: Cube) -> BetaRecord:
        """All variants of one cube, minimized over the same candidate lines

        Refined lines join the candidate set of every variant, which keeps
        beta^{*,c} <= beta* <= beta** line by line and so after minimizing.
        """

        cubes = self.near(cube)
        own = next(i for i, r in enumerate(cubes) if r.key == cube.key)
        dens = np.array([self.densities(r.level)[r.index] for r in cubes])
        lines = self.candidates(cube)
        powers = self.ball_powers(cubes, lines)
        values = self._variants(powers, dens, own)

        if self.config.refine:
            for key in ('star', 'star_star', 'ball'):
                best = int(np.argmin(values[key]))

                def objective(line, key=key):
                    return self._variants(self.ball_powers(cubes, [line]), dens, own)[key][0]

                refined, _ = refine_line(
                    self.group, lines[best], objective, cube.side, self.config.refine_maxiter
                )
                if refined is not lines[best]:
                    lines = lines.extended(refined)
                    powers = np.column_stack([powers, self.ball_powers(cubes, [refined])])
                    values = self._variants(powers, dens, own)

        root = 1.0 / self.power
        best = {key: int(np.argmin(values[key])) for key in ('star', 'star_star', 'ball')}
        return BetaRecord(
            cube=cube,
            step=self.group.step,
            beta_star=float(values['star'][best['star']] ** root),
            beta_star_c={c: float(values[c].min() ** root) for c in self.config.c_grid},
            beta_star_star=float(values['star_star'][best['star_star']] ** root),
            beta_ball=float(values['ball'][best['ball']] ** root),
            line=lines[best['star']],
            lines={'star_star': lines[best['star_star']], 'ball': lines[best['ball']]},
            near_size=len(cubes),
            mass=self.system.mass(cube, self.mu.weights),
            diam=effective_diam(self.system, cube),
            density=float(dens[own]),
            candidates=len(lines),
        )

    def beta_star(self, cube: Cube) -> float:
        return self.record(cube).beta_star

    def beta_star_c(self, cube: Cube, c: float) -> float:
        """beta^{*,c}(mu, Q) for any c > 0, 0 when no cube of Near(Q) is c-dense"""

        if not c > 0:
            raise ValueError(f'c must be positive, got {c}')

        cubes = self.near(cube)
        dens = np.array([self.densities(r.level)[r.index] for r in cubes])
        dense = dens >= c
        if not dense.any():
            return 0.0

        kept = [r for r, keep in zip(cubes, dense) if keep]
        powers = self.ball_powers(kept, self.candidates(cube)) * min(c, 1.0)
        return float(powers.max(axis=0).min() ** (1.0 / self.power))

    def beta_star_star(self, cube: Cube) -> float:
        return self.record(cube).beta_star_star

    def beta_ball(self, cube: Cube) -> float:
        return self.record(cube).beta_ball

    def cubes(self) -> list[Cube]:
        """Cubes of side at most 1, the ones the Jones functions sum over"""

        return [c for level in self.system.levels if self.system.side(level) <= 1 for c in self.system.cubes(level)]

    def report(self, cubes: list[Cube]|None=None) -> BetaReport:
        """Records of the given cubes (default: side at most 1), in order"""

        cubes = self.cubes() if cubes is None else cubes
        log.info('Computing beta numbers of %s cubes', humanize_number(len(cubes), whole=True))

        if self.config.workers > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
                records = list(pool.map(self.record, cubes))
        else:
            records = [self.record(cube) for cube in cubes]

        return BetaReport(self.group.spec.name, self.group.step, tuple(self.config.c_grid), tuple(records))

