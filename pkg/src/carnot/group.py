"""Carnot group arithmetic in exponential coordinates"""

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from errors import GeometryError, SpecError, UnsupportedStepError
from utils import chunks
from .norm import HomogeneousNorm
from .spec import StratificationSpec


log = logging.getLogger(__name__)

PAIRWISE_BLOCK = 1 << 20


@dataclass(frozen=True, eq=False)
class GroupPoint:
    """A point (x_1, .., x_s) of a group given in exponential coordinates"""

    coords: np.ndarray
    spec: StratificationSpec = field(repr=False)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1)
        if coords.size != self.spec.total_dim:
            raise SpecError(f'{self.spec.name} needs {self.spec.total_dim} coordinates, got {coords.size}')

        if not np.all(np.isfinite(coords)):
            raise GeometryError('group points must have finite coordinates')

        coords.setflags(write=False)
        object.__setattr__(self, 'coords', coords)

    @property
    def layers(self) -> tuple[np.ndarray, ...]:
        return tuple(self.coords[self.spec.layer_slice(i)] for i in range(1, self.spec.step + 1))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GroupPoint)
            and other.spec == self.spec
            and np.array_equal(other.coords, self.coords)
        )

    def __hash__(self) -> int:
        return hash((self.spec, self.coords.tobytes()))


class CarnotGroup:
    """A stratified group together with the homogeneous norm used for distances

    Every operation accepts GroupPoint objects or raw arrays of shape (..., N).
    Arrays broadcast over their leading axes. Results are GroupPoints when any
    argument was one, arrays otherwise.
    """

    def __init__(self, spec: StratificationSpec, norm: HomogeneousNorm|None=None):
        self.spec = spec
        self.norm = norm or HomogeneousNorm()

    def __repr__(self) -> str:
        return f'CarnotGroup({self.spec.name}, eta={self.norm.eta})'

    @property
    def dim(self) -> int:
        return self.spec.total_dim

    @property
    def step(self) -> int:
        return self.spec.step

    @property
    def is_abelian(self) -> bool:
        return self.spec.is_abelian

    @cached_property
    def _dilation_powers(self) -> np.ndarray:
        return self.spec.layer_of.astype(float)

    def coords(self, a) -> np.ndarray:
        """Coordinate array of a point or an array of points

        Raises:
            SpecError: the point belongs to another group or has the wrong length
        """

        if isinstance(a, GroupPoint):
            if a.spec != self.spec:
                raise SpecError(f'point of {a.spec.name} used in {self.spec.name}')
            return a.coords

        arr = np.asarray(a, dtype=float)
        if arr.ndim == 0 or arr.shape[-1] != self.dim:
            raise SpecError(f'{self.spec.name} needs {self.dim} coordinates, got shape {arr.shape}')

        return arr

    def point(self, coords) -> GroupPoint:
        return GroupPoint(coords, self.spec)

    def _wrap(self, result: np.ndarray, *args):
        if any(isinstance(a, GroupPoint) for a in args):
            return GroupPoint(result, self.spec)
        return result

    def horizontal(self, v) -> np.ndarray:
        """Embed first layer vectors (..., n_1) as (v, 0, .., 0)"""

        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape[:-1] + (self.dim,))
        out[..., :self.spec.layer_dims[0]] = v
        return out

    def bracket(self, x, y) -> np.ndarray:
        """Lie bracket of coordinate vectors through the structure tensor"""

        return np.einsum('...i,...j,ijk->...k', x, y, self.spec.structure)

    def multiply(self, a, b):
        """Group product a * b by the Baker-Campbell-Hausdorff formula

        Up to step three the series stops after

            X + Y + [X,Y]/2 + ([X,[X,Y]] - [Y,[X,Y]])/12

        and is exact.

        Raises:
            UnsupportedStepError: the group has step four or more
        """

        x, y = self.coords(a), self.coords(b)
        if self.step == 1:
            return self._wrap(x + y, a, b)

        if self.step > 3:
            raise UnsupportedStepError(f'multiplication is implemented up to step 3, {self.spec.name} has step {self.step}')

        x, y = np.broadcast_arrays(x, y)
        xy = self.bracket(x, y)
        out = x + y + 0.5 * xy
        if self.step == 3:
            out = out + (self.bracket(x, xy) - self.bracket(y, xy)) / 12.0

        return self._wrap(out, a, b)

    def inverse(self, a):
        return self._wrap(-self.coords(a), a)

    def dilate(self, t: float, a):
        """delta_t(x) = (t x_1, t^2 x_2, .., t^s x_s)

        Raises:
            GeometryError: t is not positive
        """

        if not t > 0:
            raise GeometryError(f'dilation factor must be positive, got {t}')

        return self._wrap(self.coords(a) * t ** self._dilation_powers, a)

    def layer_norms(self, a) -> np.ndarray:
        """Euclidean norm of every layer, shape (..., s)"""

        g = self.coords(a)
        starts = np.asarray(self.spec.offsets[:-1])
        return np.sqrt(np.add.reduceat(g * g, starts, axis=-1))

    def norm_of(self, a, norm: HomogeneousNorm|None=None):
        """Homogeneous norm N(a)"""

        value = (norm or self.norm).gauge(self.layer_norms(a))
        return float(value) if np.ndim(value) == 0 else value

    def distance(self, a, b, norm: HomogeneousNorm|None=None):
        """Left invariant distance d(a, b) = N(a^-1 b)"""

        g = self.multiply(-self.coords(a), self.coords(b))
        return self.norm_of(g, norm)

    def layer_distances(self, a, b) -> np.ndarray:
        """Quotient distances d_i(pi_i a, pi_i b) for i = 1..s, shape (..., s)

        d_i is the gauge of a^-1 b truncated to its first i layers.
        """

        if self.step == 1:
            return self.norm.gauge(self.layer_norms(np.asarray(self.coords(b)) - self.coords(a)))[..., None]

        g = self.multiply(-self.coords(a), self.coords(b))
        norms = self.layer_norms(g)
        return np.stack([self.norm.gauge(norms[..., :i]) for i in range(1, self.step + 1)], axis=-1)

    def pairwise(self, a, b) -> np.ndarray:
        """Distance matrix between two point arrays, shape (len(a), len(b))"""

        a = np.atleast_2d(self.coords(a))
        b = np.atleast_2d(self.coords(b))
        out = np.empty((len(a), len(b)))
        rows = max(PAIRWISE_BLOCK // max(len(b), 1), 1)
        for part in chunks(len(a), rows):
            out[part] = self.distance(a[part, None, :], b[None, :, :])
        return out

    def project_layer(self, a, i: int):
        """pi_i: truncation to the first i layers

        Raises:
            SpecError: i outside 1..s
        """

        self.spec.check_layer(i)
        truncated = self.coords(a)[..., :self.spec.offsets[i]]
        if isinstance(a, GroupPoint):
            return GroupPoint(truncated, self.spec.truncate(i))
        return truncated

    def quotient(self, i: int) -> 'CarnotGroup':
        """The group G_i carrying the nested quotient norm"""

        return CarnotGroup(self.spec.truncate(i), self.norm)


def heisenberg_product(a, b) -> np.ndarray:
    """Closed form product in H^m, coordinates (x, y, t)"""

    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = (a.shape[-1] - 1) // 2
    x1, y1, t1 = a[..., :m], a[..., m:2 * m], a[..., 2 * m]
    x2, y2, t2 = b[..., :m], b[..., m:2 * m], b[..., 2 * m]
    t = t1 + t2 + 0.5 * np.sum(x1 * y2 - y1 * x2, axis=-1)
    return np.concatenate([x1 + x2, y1 + y2, t[..., None]], axis=-1)


def engel_product(a, b) -> np.ndarray:
    """Closed form product in the Engel group with [X1,X2]=X3, [X1,X3]=X4"""

    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a1, a2, a3, a4 = np.moveaxis(a, -1, 0)
    b1, b2, b3, b4 = np.moveaxis(b, -1, 0)
    cross = a1 * b2 - a2 * b1
    z3 = a3 + b3 + 0.5 * cross
    z4 = a4 + b4 + 0.5 * (a1 * b3 - a3 * b1) + (a1 - b1) * cross / 12.0
    return np.stack([a1 + b1, a2 + b2, z3, z4], axis=-1)
