"""Finite families of horizontal lines minimized over in place of all lines"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Callable

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import minimize

from carnot import CarnotGroup, HorizontalLine
from constants import MAX_PAIR_ATOMS, REFINE_MAXITER
from errors import GeometryError


log = logging.getLogger(__name__)

COINCIDENT_TOL = 1e-12


@dataclass(frozen=True)
class LineCandidateSet:
    lines: tuple[HorizontalLine, ...]

    def __post_init__(self):
        if not self.lines:
            raise GeometryError('a candidate set needs at least one line')

    def __len__(self) -> int:
        return len(self.lines)

    def __iter__(self):
        return iter(self.lines)

    def __getitem__(self, i: int) -> HorizontalLine:
        return self.lines[i]

    @property
    def provenance(self) -> tuple[str, ...]:
        return tuple(line.provenance for line in self.lines)

    def extended(self, *lines: HorizontalLine) -> 'LineCandidateSet':
        return LineCandidateSet(self.lines + tuple(lines))


def farthest_atoms(group: CarnotGroup, points: np.ndarray, weights: np.ndarray, count: int) -> np.ndarray:
    """Farthest point sampling started from the heaviest atom

    Returns:
        np.ndarray: at most count indices into points, in selection order
    """

    first = int(np.argmax(weights))
    chosen = [first]
    gaps = np.atleast_1d(group.distance(points[first], points))
    while len(chosen) < min(count, len(points)):
        nxt = int(np.argmax(gaps))
        if gaps[nxt] <= 0:
            break
        chosen.append(nxt)
        gaps = np.minimum(gaps, np.atleast_1d(group.distance(points[nxt], points)))
    return np.array(chosen, dtype=int)


def pair_lines(group: CarnotGroup, points: np.ndarray) -> list[HorizontalLine]:
    """Lines based at the first atom of each pair, pointing at the second in the first layer"""

    n1 = group.spec.layer_dims[0]
    lines = []
    for i, j in combinations(range(len(points)), 2):
        step = points[j, :n1] - points[i, :n1]
        if np.linalg.norm(step) <= COINCIDENT_TOL:
            continue
        lines.append(HorizontalLine.through(points[i], step, 'pair'))
    return lines


def pca_line(group: CarnotGroup, points: np.ndarray, weights: np.ndarray) -> HorizontalLine:
    """Principal axis of the weighted first layer projections

    The base is the atom closest to the weighted mean, moved horizontally
    onto the mean. Coincident projections fall back to the first axis.
    """

    n1 = group.spec.layer_dims[0]
    proj = points[:, :n1]
    w = weights / weights.sum()
    mean = w @ proj
    centered = proj - mean
    cov = (centered * w[:, None]).T @ centered

    values, vectors = eigh(cov)
    if values[-1] <= COINCIDENT_TOL:
        direction = np.eye(n1)[0]
    else:
        direction = vectors[:, -1]
        lead = np.flatnonzero(np.abs(direction) > COINCIDENT_TOL)[0]
        direction = direction * np.sign(direction[lead])

    nearest = int(np.argmin(np.linalg.norm(centered, axis=1)))
    base = group.multiply(points[nearest], group.horizontal(mean - proj[nearest]))
    return HorizontalLine.through(base, direction, 'pca')


def line_candidates(group: CarnotGroup, points, weights, max_atoms: int|None=MAX_PAIR_ATOMS) -> LineCandidateSet:
    """Pair lines through a spread out subset of the atoms, then the PCA line

    Args:
        group (CarnotGroup): ambient group
        points (array-like): atoms of the region
        weights (array-like): their masses
        max_atoms (int, None): atoms kept for the pair lines by farthest point
            sampling, None for a line through every pair

    Raises:
        GeometryError: no atoms

    Returns:
        LineCandidateSet: deterministic order, pair lines first
    """

    points = np.atleast_2d(group.coords(points))
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if len(points) == 0:
        raise GeometryError('line candidates need at least one atom')

    picked = np.arange(len(points)) if max_atoms is None else farthest_atoms(group, points, weights, max_atoms)
    lines = pair_lines(group, points[picked])
    lines.append(pca_line(group, points, weights))
    return LineCandidateSet(tuple(lines))


def refine_line(group: CarnotGroup, line: HorizontalLine, objective: Callable[[HorizontalLine], float],
                scale: float, maxiter: int=REFINE_MAXITER) -> tuple[HorizontalLine, float]:
    """Nelder-Mead over (horizontal base offset, direction) started at line

    Only an improvement is returned, so the objective never increases.

    Args:
        group (CarnotGroup): ambient group
        line (HorizontalLine): starting line
        objective (callable): the quantity to minimize over lines
        scale (float): size of the initial base offsets
        maxiter (int): iteration budget

    Returns:
        tuple: (line, objective value)
    """

    n1 = line.direction.size
    start = float(objective(line))
    if start == 0:
        return line, start

    def build(x: np.ndarray) -> HorizontalLine|None:
        direction = line.direction + x[n1:]
        if np.linalg.norm(direction) <= COINCIDENT_TOL:
            return None
        base = group.multiply(line.base, group.horizontal(x[:n1]))
        return HorizontalLine.through(base, direction, 'refined')

    def cost(x: np.ndarray) -> float:
        candidate = build(x)
        return np.inf if candidate is None else float(objective(candidate))

    dim = 2 * n1
    simplex = np.vstack([np.zeros(dim), np.diag(np.r_[np.full(n1, 0.1 * scale), np.full(n1, 0.1)])])
    res = minimize(
        cost, np.zeros(dim), method='Nelder-Mead',
        options={'maxiter': maxiter, 'initial_simplex': simplex, 'xatol': 1e-10, 'fatol': 1e-14},
    )

    if res.fun < start:
        log.debug('Refined line objective %.4g -> %.4g in %s iterations', start, res.fun, res.nit)
        return build(res.x), float(res.fun)
    return line, start
