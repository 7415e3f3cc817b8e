"""Hebisch-Sikora homogeneous norms

N_eta(g) is the smallest r > 0 with delta_{1/r}(g) inside the Euclidean ball of
radius eta. Writing the layer norms of g as |g_1|..|g_s| this is the root of

    sum_i |g_i|^2 r^(-2i) = eta^2

which is decreasing in r, so the root is unique.
"""

import logging
from dataclasses import dataclass
from math import ceil, log2, sqrt

import numpy as np

from constants import DEFAULT_GAUGE_TOL, NEWTON_POLISH_STEPS
from errors import GeometryError


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HomogeneousNorm:
    """Gauge parameter eta and the relative tolerance of the root solve"""

    eta: float = 1.0
    gauge_tol: float = DEFAULT_GAUGE_TOL

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise GeometryError(f'eta must be positive, got {self.eta}')

        if not 0 < self.gauge_tol < 1:
            raise GeometryError(f'gauge_tol must lie in (0, 1), got {self.gauge_tol}')

    def gauge(self, layer_norms) -> np.ndarray:
        """Solve for N given the Euclidean norm of every layer

        Steps one and two have closed forms, deeper groups are bisected.

        Args:
            layer_norms (array-like): shape (..., s), nonnegative

        Returns:
            np.ndarray: shape (...)
        """

        norms = np.asarray(layer_norms, dtype=float)
        step = norms.shape[-1]
        if step == 1:
            return norms[..., 0] / self.eta

        if step == 2:
            # a u + b u^2 = eta^2 with u = r^-2
            a = norms[..., 0] ** 2
            b = norms[..., 1] ** 2
            eta2 = self.eta ** 2
            return np.sqrt((a + np.sqrt(a * a + 4.0 * b * eta2)) / (2.0 * eta2))

        return self.bisect(norms)

    def bisect(self, layer_norms) -> np.ndarray:
        """General gauge solve, also the oracle for the closed forms

        The root is bracketed by m = max_i (|g_i|/eta)^(1/i) and sqrt(s) * m,
        bisected to gauge_tol and then polished with a few Newton steps kept
        inside the final bracket.
        """

        norms = np.asarray(layer_norms, dtype=float)
        step = norms.shape[-1]
        powers = np.arange(1, step + 1, dtype=float)
        squares = norms ** 2

        lo = np.max((norms / self.eta) ** (1.0 / powers), axis=-1)
        hi = sqrt(step) * lo
        zero = lo == 0
        lo = np.where(zero, 1.0, lo)
        hi = np.where(zero, 1.0, hi)

        def excess(r):
            return np.sum(squares * r[..., None] ** (-2.0 * powers), axis=-1) - self.eta ** 2

        iterations = ceil(log2(max(sqrt(step) - 1, self.gauge_tol) / self.gauge_tol)) + 2
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            above = excess(mid) > 0
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)

        r = 0.5 * (lo + hi)
        for _ in range(NEWTON_POLISH_STEPS):
            slope = np.sum(-2.0 * powers * squares * r[..., None] ** (-2.0 * powers - 1), axis=-1)
            with np.errstate(divide='ignore', invalid='ignore'):
                nxt = r - excess(r) / slope
            r = np.where(np.isfinite(nxt), np.clip(nxt, lo, hi), r)

        return np.where(zero, 0.0, r)
