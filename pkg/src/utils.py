"""Small helpers shared by the packages"""

from math import floor, log10
from typing import Iterator

import numpy as np

from constants import DEFAULT_SEED

SUFFIXES = ('', 'K', 'M', 'B', 'T')


def humanize_number(number: int|float, /, whole: bool=False) -> str:
    """Short form of a count for log lines, 12345 -> 12.35K

    Args:
        number (int, float): a non negative number
        whole (bool): drop the decimals
    """

    if number < 1000:
        return str(floor(number)) if whole else f'{number:.4g}'

    power = min(int(log10(number)) // 3, len(SUFFIXES) - 1)
    scaled = number / 1000 ** power
    return f'{scaled:.0f}{SUFFIXES[power]}' if whole else f'{scaled:.2f}{SUFFIXES[power]}'


def make_rng(seed: int|None=None) -> np.random.Generator:
    """Seeded PCG64 generator, the only source of randomness in the project"""

    return np.random.default_rng(DEFAULT_SEED if seed is None else seed)


def chunks(total: int, size: int) -> Iterator[slice]:
    """Yield consecutive slices covering range(total) in blocks of `size`"""

    size = max(int(size), 1)
    for start in range(0, total, size):
        yield slice(start, min(start + size, total))


def fit_slope(xs, ys):
    """Least squares slope of ys against xs

    Args:
        xs (array-like): abscissae, at least two distinct values
        ys (array-like): ordinates of shape (m,), or (m, n) for n columns at once

    Returns:
        float or np.ndarray: the slope per column, 0 for degenerate abscissae
            and inf for a column holding non-finite values
    """

    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    columns = ys.reshape(ys.shape[0], -1)
    slopes = np.zeros(columns.shape[1])
    if xs.size >= 2 and np.ptp(xs) > 0:
        finite = np.all(np.isfinite(columns), axis=0)
        slopes[~finite] = np.inf
        if finite.any():
            slopes[finite] = np.polyfit(xs, columns[:, finite], 1)[0]

    return float(slopes[0]) if ys.ndim == 1 else slopes
