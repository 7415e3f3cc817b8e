"""Randomized calibration of the Hebisch-Sikora parameter eta"""

import logging
from dataclasses import dataclass

import numpy as np

from constants import (
    CALIBRATION_BATCH,
    CALIBRATION_MARGIN,
    CALIBRATION_TRIALS,
    ETA_CANDIDATES,
)
from utils import chunks, make_rng
from .group import CarnotGroup
from .norm import HomogeneousNorm
from .spec import StratificationSpec


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of a calibration run

    Attributes:
        eta: the value to use, already halved for non-abelian groups
        passed: the largest candidate that survived every trial
        trials: trials run per candidate
        worst_margin: smallest N(g) + N(h) - N(gh) seen for the passing candidate
        rejected: candidates that failed, largest first
    """

    eta: float
    passed: float
    trials: int
    worst_margin: float
    rejected: tuple[float, ...] = ()


def sample_pairs(spec: StratificationSpec, size: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Random pairs mixing horizontal, vertical and balanced points

    Layers get independent log-uniform scales so the sample covers points
    dominated by any single layer.
    """

    out = []
    for _ in range(2):
        raw = rng.standard_normal((size, spec.total_dim))
        scales = 10.0 ** rng.uniform(-2.0, 2.0, size=(size, spec.step))
        raw *= np.repeat(scales, spec.layer_dims, axis=1)
        out.append(raw)

    return out[0], out[1]


def triangle_margins(group: CarnotGroup, g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """N(g) + N(h) - N(gh), scaled by N(g) + N(h)"""

    ng = group.norm_of(g)
    nh = group.norm_of(h)
    ngh = group.norm_of(group.multiply(g, h))
    total = ng + nh
    return np.where(total > 0, (total - ngh) / np.where(total > 0, total, 1.0), 0.0)


def calibrate_eta(
    spec: StratificationSpec,
    trials: int=CALIBRATION_TRIALS,
    seed: int|None=None,
    candidates: tuple[float, ...]=ETA_CANDIDATES,
    gauge_tol: float|None=None,
) -> CalibrationResult:
    """Grid search for the largest eta whose gauge passes the triangle inequality

    The same random pairs are used for every candidate. Non-abelian groups get
    the passing value halved once; abelian groups are exact at eta = 1.

    Returns:
        CalibrationResult: the chosen eta and the diagnostics of the search
    """

    if spec.is_abelian:
        return CalibrationResult(1.0, 1.0, 0, 0.0)

    rejected = []
    for eta in sorted(candidates, reverse=True):
        norm = HomogeneousNorm(eta) if gauge_tol is None else HomogeneousNorm(eta, gauge_tol)
        group = CarnotGroup(spec, norm)
        rng = make_rng(seed)
        worst = np.inf
        for part in chunks(trials, CALIBRATION_BATCH):
            g, h = sample_pairs(spec, part.stop - part.start, rng)
            worst = min(worst, float(triangle_margins(group, g, h).min()))
            if worst < CALIBRATION_MARGIN:
                break

        if worst >= CALIBRATION_MARGIN:
            log.info('Calibrated %s: eta=%s passed %s trials (worst margin %.3g)', spec.name, eta, trials, worst)
            return CalibrationResult(eta / 2, eta, trials, worst, tuple(rejected))

        log.debug('eta=%s rejected for %s with margin %.3g', eta, spec.name, worst)
        rejected.append(eta)

    smallest = min(candidates)
    log.warning('No eta candidate passed for %s, falling back to %s', spec.name, smallest / 2)
    return CalibrationResult(smallest / 2, smallest, trials, worst, tuple(rejected))
