"""Summary statistics used in the replication tables."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

KS_C_1PCT = 1.628


class BoxplotStats(NamedTuple):
    lower_whisker: float
    lower_hinge: float
    median: float
    upper_hinge: float
    upper_whisker: float


def _nonempty(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("empty sample")
    return arr


def boxplot_stats(errors) -> BoxplotStats:
    """Tukey five-number boxplot summary.

    Hinges are the medians of the lower and upper halves of the sorted data,
    both halves including the middle element when the count is odd. Whiskers
    are the most extreme observations within 1.5 times the hinge spread
    beyond the hinges.
    """
    x = np.sort(_nonempty(errors))
    n = x.size
    half = (n + 1) // 2
    lh = float(np.median(x[:half]))
    uh = float(np.median(x[n - half :]))
    med = float(np.median(x))
    spread = 1.5 * (uh - lh)
    lw = float(x[x >= lh - spread][0])
    uw = float(x[x <= uh + spread][-1])
    return BoxplotStats(lw, lh, med, uh, uw)


def quantile_abs(errors, p: float = 0.95) -> float:
    """Linear-interpolation ``p``-quantile of ``|errors|`` (order statistic ``(n-1)p + 1``)."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    return float(np.quantile(np.abs(_nonempty(errors)), p, method="linear"))


def ks_two_sample(a, b) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov distance and its asymptotic 1% critical value."""
    a = np.sort(_nonempty(a))
    b = np.sort(_nonempty(b))
    n, m = a.size, b.size
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / n
    fb = np.searchsorted(b, grid, side="right") / m
    stat = float(np.max(np.abs(fa - fb)))
    return stat, KS_C_1PCT * math.sqrt((n + m) / (n * m))


def histogram(values, n_bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width bins spanning ``[min, max]`` of ``values``."""
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    counts, edges = np.histogram(_nonempty(values), bins=n_bins)
    return edges, counts


def sample_kurtosis(x) -> float:
    """Plain (non-excess) moment kurtosis ``m4 / m2^2``."""
    x = _nonempty(x)
    d = x - x.mean()
    m2 = np.mean(d**2)
    return float(np.mean(d**4) / m2**2)
