"""EM and EMS reconstruction of an input histogram from aggregated wave reports."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import BucketSpec, DegenerateError, DomainError, as_params, bucket_of


@dataclass(frozen=True)
class EmConfig:
    tau: float = 1e-3
    max_iters: int = 10_000
    smoothing: bool = True
    init: str = "uniform"
    track_history: bool = False

    def __post_init__(self):
        if not self.tau > 0:
            raise DomainError(f"tau must be > 0, got {self.tau}")
        if self.max_iters < 1:
            raise DomainError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.init != "uniform":
            raise DomainError(f"unknown init rule {self.init!r}")

    @classmethod
    def em(cls, eps, **kw) -> "EmConfig":
        """Plain EM with ``tau = 1e-3 e^eps``."""
        return cls(tau=1e-3 * as_params(eps).exp_eps, smoothing=False, **kw)

    @classmethod
    def ems(cls, **kw) -> "EmConfig":
        return cls(tau=1e-3, smoothing=True, **kw)


@dataclass
class EmResult:
    x: np.ndarray
    iterations: int
    log_likelihood: float
    converged: bool
    history: list = field(default_factory=list)


def report_counts(reports, lo: float, hi: float, d_out: int) -> np.ndarray:
    """Counts ``n_j`` of continuous reports in ``d_out`` equal buckets of ``[lo, hi]``."""
    idx = bucket_of(np.asarray(reports, dtype=float), BucketSpec(lo, hi, d_out))
    return np.bincount(np.atleast_1d(idx), minlength=d_out)


def _predicted(x, M, counts):
    pred = M @ x
    bad = (counts > 0) & (pred <= 0)
    if np.any(bad):
        raise DegenerateError(f"zero predicted probability for {int(bad.sum())} observed bucket(s)")
    return pred


def log_likelihood(x, M, counts) -> float:
    """``sum_j n_j ln(sum_i M[j, i] x_i)`` over buckets with reports."""
    M = np.asarray(M, dtype=float)
    counts = np.asarray(counts, dtype=float)
    pred = _predicted(np.asarray(x, dtype=float), M, counts)
    seen = counts > 0
    return float(counts[seen] @ np.log(pred[seen]))


def em_step(x, M, counts) -> np.ndarray:
    """One E-step and M-step: ``P_i = x_i sum_j n_j M[j,i] / (M x)_j``, then normalize."""
    x = np.asarray(x, dtype=float)
    M = np.asarray(M, dtype=float)
    counts = np.asarray(counts, dtype=float)
    pred = _predicted(x, M, counts)
    ratio = np.divide(counts, pred, out=np.zeros_like(counts), where=counts > 0)
    P = x * (M.T @ ratio)
    total = P.sum()
    if not total > 0:
        raise DegenerateError("EM step produced an all-zero estimate")
    return P / total


def smooth(x) -> np.ndarray:
    """Binomial (1, 2, 1)/4 smoothing; the outward weight at each edge stays on the edge."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return x.copy()
    y = 0.5 * x
    y[1:] += 0.25 * x[:-1]
    y[:-1] += 0.25 * x[1:]
    y[0] += 0.25 * x[0]
    y[-1] += 0.25 * x[-1]
    return y / y.sum()


def reconstruct(counts, M, cfg: EmConfig = EmConfig()) -> EmResult:
    """Iterate EM (or EMS) from the uniform start until ``|L_{t+1} - L_t| < tau``."""
    M = np.asarray(M, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (M.shape[0],):
        raise DomainError(f"counts length {counts.shape} does not match M rows {M.shape[0]}")
    d = M.shape[1]
    x = np.full(d, 1.0 / d)
    ll = log_likelihood(x, M, counts)
    history = [ll] if cfg.track_history else []
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        x = em_step(x, M, counts)
        if cfg.smoothing:
            x = smooth(x)
        new_ll = log_likelihood(x, M, counts)
        if cfg.track_history:
            history.append(new_ll)
        done = abs(new_ll - ll) < cfg.tau
        ll = new_ll
        if done:
            converged = True
            break
    if not converged:
        warnings.warn(f"EM stopped at max_iters={cfg.max_iters} without meeting tau={cfg.tau}")
    return EmResult(x, it, ll, converged, history)

