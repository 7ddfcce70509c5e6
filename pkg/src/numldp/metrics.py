"""Utility metrics between a true and an estimated histogram over ``[0, 1]``."""

from __future__ import annotations

import numpy as np

from .core import DomainError, as_rng

QUANTILE_LEVELS = np.arange(1, 10) / 10
# cumulative sums of exact decimals (0.1 + 0.2 + ...) overshoot by a few ulps
_CDF_TOL = 1e-12


def _pair(x, xh):
    x = np.asarray(x, dtype=float)
    xh = np.asarray(xh, dtype=float)
    if x.shape != xh.shape or x.ndim != 1:
        raise DomainError(f"histogram shapes differ: {x.shape} vs {xh.shape}")
    return x, xh


def cdf(x) -> np.ndarray:
    return np.cumsum(np.asarray(x, dtype=float))


def wasserstein(x, xh, unit: str = "domain") -> float:
    """L1 distance between CDFs; ``unit="domain"`` scales by the bucket width 1/d."""
    x, xh = _pair(x, xh)
    w = float(np.abs(cdf(x) - cdf(xh)).sum())
    if unit == "bucket":
        return w
    if unit == "domain":
        return w / x.size
    raise DomainError(f"unknown unit {unit!r}")


def ks_distance(x, xh) -> float:
    x, xh = _pair(x, xh)
    return float(np.abs(cdf(x) - cdf(xh)).max())


def _range_errors(x, xh, lo, hi):
    px = np.concatenate([[0.0], cdf(x)])
    ph = np.concatenate([[0.0], cdf(xh)])
    return np.abs((px[hi] - px[lo]) - (ph[hi] - ph[lo]))


def range_query_mae(x, xh, alpha: float, trials: int = 1000, seed=0) -> float:
    """Mean |R(x, i, alpha) - R(xh, i, alpha)| over random starts ``i`` in ``[0, 1 - alpha]``.

    Starts are drawn continuously and snapped to bucket boundaries.
    """
    x, xh = _pair(x, xh)
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    d = x.size
    rng = as_rng(seed)
    start = rng.uniform(0.0, 1.0 - alpha, size=trials)
    lo = np.rint(start * d).astype(np.int64)
    hi = np.minimum(lo + int(round(alpha * d)), d)
    return float(_range_errors(x, xh, lo, hi).mean())


def range_query_exhaustive(x, xh, alpha: float) -> float:
    """Average error over every bucket-aligned start; the expectation the sampler targets."""
    x, xh = _pair(x, xh)
    d = x.size
    width = int(round(alpha * d))
    lo = np.arange(0, d - width + 1)
    return float(_range_errors(x, xh, lo, lo + width).mean())


def midpoints(d: int) -> np.ndarray:
    return (np.arange(d) + 0.5) / d


def mean_of(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(x @ midpoints(x.size))


def variance_of(x) -> float:
    x = np.asarray(x, dtype=float)
    m = midpoints(x.size)
    mu = x @ m
    return float(x @ (m - mu) ** 2)


def quantile(x, beta: float) -> float:
    """Midpoint of the largest bucket whose CDF is <= beta; bucket 0 when none qualifies."""
    c = cdf(x)
    ok = np.nonzero(c <= beta + _CDF_TOL)[0]
    k = int(ok[-1]) if ok.size else 0
    return (k + 0.5) / c.size


def quantiles_mae(x, xh, levels=QUANTILE_LEVELS) -> float:
    x, xh = _pair(x, xh)
    return float(np.mean([abs(quantile(x, b) - quantile(xh, b)) for b in levels]))


def mean_error(x, xh) -> float:
    return abs(mean_of(x) - mean_of(xh))


def variance_error(x, xh) -> float:
    return abs(variance_of(x) - variance_of(xh))
