"""Horizontal lines and distances measured against them

Every distance to a line L = x * {(tv, 0, .., 0)} is the minimum of a one
dimensional profile in t. The first layer alone bounds each profile from below
by a multiple of |t - t0|, where t0 is the foot of the first layer projection,
so the search window around t0 is exact rather than guessed. Inside the
window a uniform grid picks the best sample and scipy's elementwise bracket
minimizer polishes it.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize.elementwise import find_minimum

from constants import LINE_GRID_SAMPLES, PROFILE_RTOL, PROFILE_SAMPLES
from errors import GeometryError
from .group import CarnotGroup, GroupPoint


log = logging.getLogger(__name__)

UNIT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class HorizontalLine:
    """The coset base * {(t v, 0, .., 0) : t real} with |v| = 1

    Attributes:
        base: exponential coordinates of a point on the line
        direction: unit vector of the first layer
        provenance: how the line was produced (given, pair, pca, refined, ...)
    """

    base: np.ndarray
    direction: np.ndarray
    provenance: str = 'given'

    def __post_init__(self):
        base = self.base.coords if isinstance(self.base, GroupPoint) else self.base
        base = np.array(base, dtype=float).reshape(-1)
        direction = np.array(self.direction, dtype=float).reshape(-1)
        length = np.linalg.norm(direction)
        if not np.isfinite(length) or length < 1e-12:
            raise GeometryError('horizontal lines need a nonzero direction')

        if abs(length - 1.0) > UNIT_TOL:
            raise GeometryError(f'direction must be a unit vector, has length {length}')

        if not np.all(np.isfinite(base)):
            raise GeometryError('line base must be finite')

        base.setflags(write=False)
        direction = direction / length
        direction.setflags(write=False)
        object.__setattr__(self, 'base', base)
        object.__setattr__(self, 'direction', direction)

    @classmethod
    def through(cls, base, direction, provenance: str='given') -> 'HorizontalLine':
        """Build a line from any nonzero direction, normalizing it"""

        direction = np.asarray(direction, dtype=float)
        length = np.linalg.norm(direction)
        if not np.isfinite(length) or length < 1e-12:
            raise GeometryError('horizontal lines need a nonzero direction')

        return cls(base, direction / length, provenance)

    def point_at(self, group: CarnotGroup, t) -> np.ndarray:
        """L(t) = base * (t v, 0, .., 0), vectorized over t"""

        step = group.horizontal(np.multiply.outer(np.asarray(t, dtype=float), self.direction))
        return group.multiply(self.base, step)

    def translated(self, group: CarnotGroup, g) -> 'HorizontalLine':
        """Left translate g * L"""

        return HorizontalLine(group.multiply(group.coords(g), self.base), self.direction, self.provenance)

    def dilated(self, group: CarnotGroup, t: float) -> 'HorizontalLine':
        """delta_t(L), again a horizontal line with the same direction"""

        return HorizontalLine(group.dilate(t, self.base), self.direction, self.provenance)

    def to_dict(self) -> dict:
        return {
            'base': self.base.tolist(),
            'direction': self.direction.tolist(),
            'provenance': self.provenance,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> 'HorizontalLine':
        return cls.through(doc['base'], doc['direction'], doc.get('provenance', 'given'))


def line_frame(group: CarnotGroup, points, line: HorizontalLine) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates of points seen from the line base and their first layer foot

    Returns:
        tuple: w = base^-1 * z of shape (m, N) and t0 = <pi_1(w), v> of shape (m,)
    """

    z = np.atleast_2d(group.coords(points))
    w = group.multiply(-line.base, z)
    t0 = w[:, :line.direction.size] @ line.direction
    return w, t0


def _moved(group: CarnotGroup, direction: np.ndarray, t: np.ndarray, cols: tuple) -> np.ndarray:
    """L(t)^-1 * z written in the line frame, (-t v, 0, .., 0) * w"""

    w = np.stack(np.broadcast_arrays(*cols), axis=-1)
    shift = group.horizontal(-np.asarray(t)[..., None] * direction)
    return group.multiply(shift, w)


def minimize_profile(profile, center: np.ndarray, half_width: np.ndarray, cols: tuple,
                     samples: int=PROFILE_SAMPLES, rtol: float=PROFILE_RTOL) -> tuple[np.ndarray, np.ndarray]:
    """Minimize many independent one dimensional profiles at once

    Args:
        profile (callable): elementwise f(t, *cols)
        center (np.ndarray): window centres, shape (m,)
        half_width (np.ndarray): window half widths, shape (m,)
        cols (tuple): per row arguments of the profile, each shape (m,)
        samples (int): grid size of the first pass
        rtol (float): relative tolerance of the polishing step

    Returns:
        tuple: minimal values and minimizing parameters, both shape (m,)
    """

    rows = np.arange(center.size)
    grid = np.linspace(-1.0, 1.0, samples)
    ts = center[:, None] + half_width[:, None] * grid
    vals = profile(ts, *(c[:, None] for c in cols))
    idx = np.argmin(vals, axis=1)
    best_t = ts[rows, idx]
    best = vals[rows, idx]

    interior = (idx > 0) & (idx < samples - 1) & (half_width > 0)
    if not interior.any():
        return best, best_t

    sel = np.flatnonzero(interior)
    bracket = (ts[sel, idx[sel] - 1], best_t[sel], ts[sel, idx[sel] + 1])
    res = find_minimum(
        profile, bracket,
        args=tuple(c[sel] for c in cols),
        tolerances={'xrtol': rtol, 'xatol': 1e-14},
    )
    better = res.success & (res.f_x <= best[sel])
    best_t[sel[better]] = res.x[better]
    best[sel[better]] = res.f_x[better]
    return best, best_t


def _perpendicular(w: np.ndarray, t0: np.ndarray, line: HorizontalLine) -> np.ndarray:
    n1 = line.direction.size
    return np.linalg.norm(w[:, :n1] - t0[:, None] * line.direction, axis=1)


def dists_to_line(group: CarnotGroup, points, line: HorizontalLine, layer: int,
                  samples: int=PROFILE_SAMPLES) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized d_i(pi_i z, pi_i L) for an array of points

    Returns:
        tuple: distances and minimizing parameters t, both shape (m,)
    """

    group.spec.check_layer(layer)
    w, t0 = line_frame(group, points, line)
    if group.is_abelian or layer == 1:
        return _perpendicular(w, t0, line) / group.norm.eta, t0

    gauge = group.norm.gauge
    direction = line.direction

    def profile(t, *cols):
        return gauge(group.layer_norms(_moved(group, direction, t, cols))[..., :layer])

    at_foot = profile(t0, *w.T)
    return minimize_profile(profile, t0, group.norm.eta * at_foot, tuple(w.T), samples)


def dist_to_line(group: CarnotGroup, z, line: HorizontalLine, layer: int,
                 window: tuple[float, float]|None=None,
                 samples: int=LINE_GRID_SAMPLES) -> tuple[float, float]:
    """Distance in the layer-i quotient from z to L and the minimizing parameter

    Args:
        group (CarnotGroup): the ambient group
        z: the point
        line (HorizontalLine): the line
        layer (int): quotient index i in 1..s
        window (tuple, optional): search interval for t; by default the
            exact window derived from the first layer bound
        samples (int): grid size

    Raises:
        GeometryError: empty window

    Returns:
        tuple: (distance, t)
    """

    group.spec.check_layer(layer)
    w, t0 = line_frame(group, z, line)
    gauge = group.norm.gauge
    direction = line.direction

    def profile(t, *cols):
        return gauge(group.layer_norms(_moved(group, direction, t, cols))[..., :layer])

    if window is None:
        if group.is_abelian or layer == 1:
            return float(_perpendicular(w, t0, line)[0] / group.norm.eta), float(t0[0])
        center, half = t0, group.norm.eta * profile(t0, *w.T)
    else:
        lo, hi = map(float, window)
        if not lo < hi:
            raise GeometryError(f'empty search window [{lo}, {hi}]')
        center, half = np.array([0.5 * (lo + hi)]), np.array([0.5 * (hi - lo)])

    value, t = minimize_profile(profile, center, half, tuple(w.T), samples)
    return float(value[0]), float(t[0])


def stratified_dist(group: CarnotGroup, x, y, r: float):
    """beta~(x, y; r) = (sum_i (d_i(pi_i x, pi_i y) / r)^(2i))^(1/2s)

    Raises:
        GeometryError: r is not positive
    """

    if not r > 0:
        raise GeometryError(f'scale must be positive, got {r}')

    step = group.step
    powers = 2.0 * np.arange(1, step + 1)
    total = np.sum((group.layer_distances(x, y) / r) ** powers, axis=-1)
    value = total ** (1.0 / (2 * step))
    return float(value) if np.ndim(value) == 0 else value


def beta_tilde_to_line(group: CarnotGroup, points, line: HorizontalLine, r: float,
                       samples: int=PROFILE_SAMPLES) -> np.ndarray:
    """beta~(z, L; r)^(2s) = min over y in L of beta~(z, y; r)^(2s), per point

    Raises:
        GeometryError: r is not positive
    """

    if not r > 0:
        raise GeometryError(f'scale must be positive, got {r}')

    w, t0 = line_frame(group, points, line)
    eta = group.norm.eta
    if group.is_abelian:
        return (_perpendicular(w, t0, line) / (eta * r)) ** 2

    gauge = group.norm.gauge
    direction = line.direction
    step = group.step
    powers = 2.0 * np.arange(1, step + 1)

    def profile(t, *cols):
        norms = group.layer_norms(_moved(group, direction, t, cols))
        total = 0.0
        for i in range(1, step + 1):
            total = total + (gauge(norms[..., :i]) / r) ** powers[i - 1]
        return total

    at_foot = profile(t0, *w.T)
    value, _ = minimize_profile(profile, t0, eta * r * np.sqrt(at_foot), tuple(w.T), samples)
    return value


def tube_alpha(group: CarnotGroup, points, line: HorizontalLine, r: float,
               samples: int=PROFILE_SAMPLES) -> np.ndarray:
    """Smallest alpha with z in L * delta_r(B(alpha^s)), per point

    Raises:
        GeometryError: r is not positive
    """

    if not r > 0:
        raise GeometryError(f'scale must be positive, got {r}')

    w, t0 = line_frame(group, points, line)
    step = group.step
    if group.is_abelian:
        return _perpendicular(w, t0, line) / r

    direction = line.direction
    inv_scale = (1.0 / r) ** group.spec.layer_of.astype(float)

    def profile(t, *cols):
        return np.linalg.norm(_moved(group, direction, t, cols) * inv_scale, axis=-1)

    at_foot = profile(t0, *w.T)
    value, _ = minimize_profile(profile, t0, r * at_foot, tuple(w.T), samples)
    return value ** (1.0 / step)


def tube_membership(group: CarnotGroup, x, line: HorizontalLine, r: float, alpha: float) -> bool:
    """Whether x lies in the tube L * delta_r(B(alpha^s))"""

    if alpha < 0:
        raise GeometryError(f'alpha must be nonnegative, got {alpha}')

    needed = float(tube_alpha(group, x, line, r)[0])
    return needed <= alpha * (1 + 1e-9) + 1e-15
