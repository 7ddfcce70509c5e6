"""Mean-estimation mechanisms (SR, PM), their variance extension, and CFO with binning."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import BucketSpec, DegenerateError, DomainError, PrivacyParams, as_params, as_rng, bucket_of
from .oracles import cfo_aggregate, cfo_perturb, norm_sub


def _check_pm1(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if np.any(~np.isfinite(v)) or np.any(v < -1) or np.any(v > 1):
        raise DomainError("inputs must lie in [-1, 1]")
    return v


def to_pm1(v):
    """Map ``[0, 1]`` onto ``[-1, 1]``."""
    return 2 * np.asarray(v, dtype=float) - 1


def from_pm1(u):
    return (np.asarray(u, dtype=float) + 1) / 2


# -- stochastic rounding ----------------------------------------------------


@dataclass(frozen=True)
class SrParams:
    privacy: PrivacyParams

    @property
    def p(self) -> float:
        e = self.privacy.exp_eps
        return 1.0 if math.isinf(e) else e / (e + 1)

    @property
    def q(self) -> float:
        return 1.0 - self.p


def sr_perturb(v, params: SrParams | PrivacyParams | float, seed) -> np.ndarray:
    """Report ``+-1/(p-q)``; ``+1`` with probability ``q + (p - q)(1 + v)/2``."""
    if not isinstance(params, SrParams):
        params = SrParams(as_params(params))
    rng = as_rng(seed)
    v = _check_pm1(v)
    p, q = params.p, params.q
    up = rng.random(v.shape) < q + (p - q) * (1 + v) / 2
    return np.where(up, 1.0, -1.0) / (p - q)


# -- piecewise mechanism ----------------------------------------------------


@dataclass(frozen=True)
class PmParams:
    privacy: PrivacyParams
    s: float = field(init=False)

    def __post_init__(self):
        e2 = math.exp(self.privacy.epsilon / 2)
        object.__setattr__(self, "s", (e2 + 1) / (e2 - 1))

    @property
    def e2(self) -> float:
        return math.exp(self.privacy.epsilon / 2)

    def left(self, v):
        return (self.e2 * np.asarray(v) - 1) / (self.e2 - 1)

    def right(self, v):
        return (self.e2 * np.asarray(v) + 1) / (self.e2 - 1)

    @property
    def high_density(self) -> float:
        e2 = self.e2
        return e2 / 2 * (e2 - 1) / (e2 + 1)

    @property
    def low_density(self) -> float:
        e2 = self.e2
        return 1 / (2 * e2) * (e2 - 1) / (e2 + 1)

    @property
    def high_mass(self) -> float:
        return self.e2 / (self.e2 + 1)


def pm_perturb(v, params: PmParams | PrivacyParams | float, seed) -> np.ndarray:
    """Uniform on ``[l(v), r(v)]`` w.p. ``e^(eps/2)/(e^(eps/2)+1)``, else uniform on the rest of ``[-s, s]``."""
    if not isinstance(params, PmParams):
        params = PmParams(as_params(params))
    rng = as_rng(seed)
    v = _check_pm1(v)
    lo, hi, s = params.left(v), params.right(v), params.s
    near = rng.random(v.shape) < params.high_mass
    u = rng.random(v.shape)
    inner = lo + u * (hi - lo)
    # inverse CDF over [-s, l) U (r, s]; total length 2s - (r - l)
    left_len = lo + s
    t = u * (2 * s - (hi - lo))
    outer = np.where(t < left_len, -s + t, hi + (t - left_len))
    return np.where(near, inner, outer)


def mean_estimate(reports) -> float:
    reports = np.asarray(reports, dtype=float)
    if reports.size == 0:
        raise DegenerateError("cannot average zero reports")
    return float(reports.mean())


def _perturb(mechanism: str, u, eps, rng):
    if mechanism == "sr":
        return sr_perturb(u, eps, rng)
    if mechanism == "pm":
        return pm_perturb(u, eps, rng)
    raise DomainError(f"unknown mean mechanism {mechanism!r}")


def estimate_unit_mean(values, mechanism: str, eps, seed) -> float:
    """Mean of ``[0, 1]`` data through SR or PM on the ``[-1, 1]`` scale."""
    rng = as_rng(seed)
    return float(from_pm1(mean_estimate(_perturb(mechanism, to_pm1(values), eps, rng))))


def split_users(n: int, seed):
    """Random disjoint index sets of sizes ``floor(n/2)`` and ``ceil(n/2)``."""
    order = as_rng(seed).permutation(n)
    return order[: n // 2], order[n // 2 :]


def variance_protocol(values, mechanism: str, eps, seed):
    """Two-phase mean/variance estimate for ``[0, 1]`` data.

    A random ``floor(n/2)`` users estimate the mean; the rest report
    ``(v - mean)^2``, which stays in ``[0, 1]`` once the mean is clipped
    there. Returns ``(mean, variance)``.
    """
    rng = as_rng(seed)
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        raise DegenerateError("variance protocol needs at least two users")
    first, second = split_users(n, rng)
    mu = estimate_unit_mean(values[first], mechanism, eps, rng)
    mu_clipped = min(max(mu, 0.0), 1.0)
    sq = (values[second] - mu_clipped) ** 2
    var = estimate_unit_mean(sq, mechanism, eps, rng)
    return mu, var


# -- CFO with binning -------------------------------------------------------


@dataclass(frozen=True)
class BinningConfig:
    c: int
    d: int

    def __post_init__(self):
        if self.c < 1 or self.d < 1 or self.d % self.c:
            raise DomainError(f"bin count {self.c} must divide d={self.d}")


def cfo_binning_pipeline(values, cfg: BinningConfig, eps, seed) -> np.ndarray:
    """Coarsen to ``c`` bins, run the cheaper CFO, Norm-Sub, then spread each bin over its fine buckets."""
    rng = as_rng(seed)
    bins = bucket_of(np.asarray(values, dtype=float), BucketSpec(0.0, 1.0, cfg.c))
    if cfg.c == 1:
        coarse = np.ones(1)
    else:
        coarse = norm_sub(cfo_aggregate(cfo_perturb(bins, cfg.c, eps, rng)))
    return np.repeat(coarse / (cfg.d // cfg.c), cfg.d // cfg.c)
