"""Point cloud sequences, their hypotheses and the lines fitted to them"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from beta import LineCandidateSet, line_candidates
from carnot import CarnotGroup, GroupIndex, HorizontalLine, tube_alpha
from constants import FLATNESS_EPS, MAX_PAIR_ATOMS, NETS_C_STAR, WINDOW_FACTOR
from cubes import build_nets
from errors import GeometryError


log = logging.getLogger(__name__)

SEPARATION_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class CloudSequence:
    """Finite clouds V_0..V_m at scales 2^-k r0

    Attributes:
        group: ambient group
        c_star: the proximity constant C*
        r0: the initial scale
        clouds: V_k as coordinate arrays of shape (n_k, N)
        lines: per level, the line of every vertex (empty at level 0)
        alphas: per level, the flatness error of every vertex (zeros at level 0)
        sources: optional row indices of every cloud into a parent sample
    """

    group: CarnotGroup
    c_star: float
    r0: float
    clouds: tuple[np.ndarray, ...]
    lines: tuple[tuple[HorizontalLine, ...], ...]|None = None
    alphas: tuple[np.ndarray, ...]|None = None
    sources: tuple[np.ndarray, ...]|None = None

    def __post_init__(self):
        if not self.c_star >= 1:
            raise GeometryError(f'C* must be at least 1, got {self.c_star}')

        if not self.r0 > 0:
            raise GeometryError(f'r0 must be positive, got {self.r0}')

        clouds = tuple(np.atleast_2d(self.group.coords(np.asarray(c, dtype=float))) for c in self.clouds)
        if not clouds or any(len(c) == 0 for c in clouds):
            raise GeometryError('every cloud must be nonempty')
        object.__setattr__(self, 'clouds', clouds)

        if (self.lines is None) != (self.alphas is None):
            raise GeometryError('lines and alphas are fitted together')

        if self.alphas is not None:
            alphas = tuple(np.asarray(a, dtype=float).reshape(-1) for a in self.alphas)
            if len(alphas) != len(clouds) or any(a.size != len(c) for a, c in zip(alphas, clouds)):
                raise GeometryError('one alpha per vertex is required')
            if any(np.any(a < 0) for a in alphas):
                raise GeometryError('alphas must be nonnegative')
            object.__setattr__(self, 'alphas', alphas)

    def __len__(self) -> int:
        return len(self.clouds)

    @property
    def m(self) -> int:
        return len(self.clouds) - 1

    @property
    def fitted(self) -> bool:
        return self.lines is not None

    def scale(self, k: int) -> float:
        """2^-k r0"""

        return self.r0 * 2.0 ** -k

    def window(self, k: int) -> float:
        """Radius of B_{k,v} = B(v, 65 C* 2^-k r0)"""

        return WINDOW_FACTOR * self.c_star * self.scale(k)

    @cached_property
    def indexes(self) -> tuple[GroupIndex, ...]:
        return tuple(GroupIndex(self.group, c) for c in self.clouds)

    def point(self, vertex: tuple[int, int]) -> np.ndarray:
        k, i = vertex
        return self.clouds[k][i]

    def sizes(self) -> list[int]:
        return [len(c) for c in self.clouds]

    def with_lines(self, lines, alphas) -> 'CloudSequence':
        return CloudSequence(self.group, self.c_star, self.r0, self.clouds, tuple(map(tuple, lines)), alphas, self.sources)

    def length_bound(self) -> float:
        """r0 + sum over k >= 1 and v in V_k of alpha^(2s) 2^-k r0"""

        if self.alphas is None:
            return self.r0
        power = 2 * self.group.step
        return self.r0 + sum(float((a ** power).sum()) * self.scale(k) for k, a in enumerate(self.alphas) if k >= 1)

    def to_dict(self) -> dict:
        doc = {
            'group': self.group.spec.name,
            'c_star': self.c_star,
            'r0': self.r0,
            'clouds': [c.tolist() for c in self.clouds],
        }
        if self.fitted:
            doc['lines'] = [[line.to_dict() for line in level] for level in self.lines]
            doc['alphas'] = [a.tolist() for a in self.alphas]
        return doc


@dataclass(frozen=True)
class ConditionResult:
    """Outcome of one cloud hypothesis

    worst is the largest ratio of the measured distance to the allowed one
    (for separation, the allowed distance to the measured one), so a
    condition passes when worst <= 1.
    """

    name: str
    passed: bool
    worst: float
    witness: tuple = ()

    def to_dict(self) -> dict:
        return {'name': self.name, 'passed': self.passed, 'worst': self.worst, 'witness': list(self.witness)}


@dataclass(frozen=True)
class CloudReport:
    separation: ConditionResult
    forward: ConditionResult
    backward: ConditionResult
    flat: tuple[np.ndarray, ...]|None = None
    sparse_windows: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return self.separation.passed and self.forward.passed and self.backward.passed

    def to_dict(self) -> dict:
        return {
            'passed': self.passed,
            'conditions': [c.to_dict() for c in (self.separation, self.forward, self.backward)],
            'flat': None if self.flat is None else [f.tolist() for f in self.flat],
            'sparse_windows': [list(v) for v in self.sparse_windows],
        }


def _separation(seq: CloudSequence) -> ConditionResult:
    worst, witness = 0.0, ()
    for k, index in enumerate(seq.indexes):
        dist, pair = index.separation()
        if not np.isfinite(dist):
            continue
        ratio = np.inf if dist == 0 else seq.scale(k) / dist
        if ratio > worst:
            worst, witness = ratio, (k, *pair)
    return ConditionResult('separation', worst <= 1 + SEPARATION_SLACK, float(worst), witness)


def _proximity(seq: CloudSequence, step: int) -> ConditionResult:
    """Every vertex of V_k has a vertex of V_{k+step} within C* 2^-k r0"""

    name = 'forward' if step > 0 else 'backward'
    worst, witness = 0.0, ()
    for k in range(len(seq)):
        if not 0 <= k + step <= seq.m:
            continue
        idx, dist = seq.indexes[k + step].nearest(seq.clouds[k])
        ratios = dist / (seq.c_star * seq.scale(k))
        i = int(np.argmax(ratios))
        if ratios[i] > worst:
            worst, witness = float(ratios[i]), (k, i, int(idx[i]))
    return ConditionResult(name, worst <= 1 + SEPARATION_SLACK, worst, witness)


def validate_clouds(seq: CloudSequence, eps: float=FLATNESS_EPS) -> CloudReport:
    """Check separation and two way proximity of a cloud sequence

    Failures are reported with the worst witness, never raised. With fitted
    lines every vertex is also classified flat (alpha < eps) or not, and
    vertices whose window holds no other vertex of their cloud are listed,
    since the window may be under-populated near the region boundary.

    Args:
        seq (CloudSequence): the clouds
        eps (float): flatness threshold

    Returns:
        CloudReport: the report
    """

    report = CloudReport(
        separation=_separation(seq),
        forward=_proximity(seq, 1),
        backward=_proximity(seq, -1),
        flat=None if seq.alphas is None else tuple(a < eps for a in seq.alphas),
        sparse_windows=tuple(
            (k, i)
            for k in range(1, len(seq)) if len(seq.clouds[k]) > 1
            for i in range(len(seq.clouds[k]))
            if seq.indexes[k].within(seq.clouds[k][i], seq.window(k)).size == 1
        ),
    )

    for condition in (report.separation, report.forward, report.backward):
        if not condition.passed:
            log.warning('Cloud condition %s fails: ratio %.4g at %s', condition.name, condition.worst, condition.witness)
    return report


def clouds_from_nets(group: CarnotGroup, points, k0: int, m: int, r0: float=1.0,
                     c_star: float=NETS_C_STAR) -> CloudSequence:
    """Nested greedy nets of levels k0..m as clouds V_0..V_{m-k0}

    Cloud j is the net of level k0 + j, so the sequence scale is 2^-k0 r0.
    Nets extend each other (forward proximity is 0) and every net vertex
    lies within twice its scale of the previous net, hence C* = 2.
    """

    points = np.atleast_2d(group.coords(points))
    nets = build_nets(group, points, k0, m, scale=r0)
    sources = tuple(nets.level(k) for k in range(k0, m + 1))
    return CloudSequence(
        group, c_star, r0 * 2.0 ** -k0,
        tuple(points[idx] for idx in sources),
        sources=sources,
    )


def _window_points(seq: CloudSequence, k: int, i: int) -> np.ndarray:
    """(V_{k-1} u V_k) n B(v, 65 C* 2^-k r0)"""

    v = seq.clouds[k][i]
    radius = seq.window(k)
    near = [seq.clouds[k][seq.indexes[k].within(v, radius)]]
    near.append(seq.clouds[k - 1][seq.indexes[k - 1].within(v, radius)])
    return np.vstack(near)


def fit_cloud_lines(seq: CloudSequence,
                    candidates: Callable[[np.ndarray, np.ndarray], LineCandidateSet]|None=None,
                    max_atoms: int|None=MAX_PAIR_ATOMS) -> CloudSequence:
    """Fit a horizontal line and flatness error to every vertex of V_1..V_m

    alpha_{k,v} is the smallest alpha with every window point inside the tube
    L delta_{2^-k r0}(B(alpha^s)), and the line is the candidate minimizing it.

    Args:
        seq (CloudSequence): the clouds
        candidates (callable, optional): maps window points and unit weights to
            candidate lines, by default pair lines and the principal axis
        max_atoms (int, None): atoms of the default candidate family, None for every pair

    Returns:
        CloudSequence: the same clouds with lines and alphas
    """

    group = seq.group
    if candidates is None:
        def candidates(points, weights):
            return line_candidates(group, points, weights, max_atoms)

    lines, alphas = [()], [np.zeros(len(seq.clouds[0]))]
    for k in range(1, len(seq)):
        level_lines, level_alphas = [], np.zeros(len(seq.clouds[k]))
        for i in range(len(seq.clouds[k])):
            window = _window_points(seq, k, i)
            best = None
            for line in candidates(window, np.ones(len(window))):
                alpha = float(tube_alpha(group, window, line, seq.scale(k)).max())
                if best is None or alpha < best[1]:
                    best = (line, alpha)
            level_lines.append(best[0])
            level_alphas[i] = best[1]

        lines.append(tuple(level_lines))
        alphas.append(level_alphas)
        log.debug('Level %s: %s lines, max alpha %.4g', k, len(level_lines), level_alphas.max())

    return seq.with_lines(lines, alphas)
