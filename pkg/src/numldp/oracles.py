"""Categorical frequency oracles: GRR, OLH, HRR, and Norm-Sub post-processing.

All perturbation functions are vectorized over users: pass an array of
inputs and get one report per entry. Aggregators return unnormalized,
possibly negative frequency estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DegenerateError,
    DomainError,
    PrivacyParams,
    ReportBatch,
    as_params,
    as_rng,
    keyed_hash,
)

GRR = "grr"
OLH = "olh"


def _check_indices(v, d: int) -> np.ndarray:
    v = np.asarray(v)
    if not np.issubdtype(v.dtype, np.integer):
        if np.any(v != np.floor(v)):
            raise DomainError("categorical inputs must be integers")
        v = v.astype(np.int64)
    if np.any(v < 0) or np.any(v >= d):
        raise DomainError(f"input index outside [0, {d})")
    return v.astype(np.int64)


# -- GRR --------------------------------------------------------------------


@dataclass(frozen=True)
class GrrParams:
    d: int
    privacy: PrivacyParams
    p: float = field(init=False)
    q: float = field(init=False)

    def __post_init__(self):
        if self.d < 2:
            raise DomainError(f"GRR needs d >= 2, got {self.d}")
        e = self.privacy.exp_eps
        if math.isinf(e):
            p, q = 1.0, 0.0
        else:
            p = e / (e + self.d - 1)
            q = 1.0 / (e + self.d - 1)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def make(cls, d: int, eps) -> "GrrParams":
        return cls(d, as_params(eps))


def grr_perturb(v, params: GrrParams, seed) -> np.ndarray:
    """Keep each input with probability ``p``, else report one of the other d-1 values."""
    rng = as_rng(seed)
    v = _check_indices(v, params.d)
    keep = rng.random(v.shape) < params.p
    # shift by 1..d-1 picks each other value with probability q exactly
    shift = rng.integers(1, params.d, size=v.shape)
    return np.where(keep, v, (v + shift) % params.d)


def grr_aggregate(reports, params: GrrParams) -> np.ndarray:
    """Unbiased frequency estimate ``((C(v)/n) - q) / (p - q)`` for every value."""
    y = _check_indices(reports, params.d)
    if y.size == 0:
        raise DegenerateError("no reports to aggregate")
    counts = np.bincount(y, minlength=params.d)
    return (counts / y.size - params.q) / (params.p - params.q)


def grr_variance(params: GrrParams, n: int) -> float:
    e = params.privacy.exp_eps
    return (params.d - 2 + e) / ((e - 1) ** 2 * n)


# -- OLH --------------------------------------------------------------------


def olh_g(eps) -> int:
    e = as_params(eps).exp_eps
    if math.isinf(e):
        return 2**31
    return max(2, int(round(e + 1)))


@dataclass(frozen=True)
class OlhParams:
    g: int
    privacy: PrivacyParams
    p: float = field(init=False)

    def __post_init__(self):
        if self.g < 2:
            raise DomainError(f"OLH needs g >= 2, got {self.g}")
        e = self.privacy.exp_eps
        object.__setattr__(self, "p", 1.0 if math.isinf(e) else e / (e + self.g - 1))

    @classmethod
    def make(cls, eps, g: int | None = None) -> "OlhParams":
        privacy = as_params(eps)
        return cls(olh_g(privacy) if g is None else g, privacy)


def olh_perturb(v, params: OlhParams, seed, d: int | None = None):
    """Return ``(keys, values)``: a fresh hash key per user and GRR of the hashed input."""
    rng = as_rng(seed)
    v = np.asarray(v)
    if d is not None:
        v = _check_indices(v, d)
    elif np.any(v < 0):
        raise DomainError("OLH input index must be nonnegative")
    keys = rng.integers(0, 2**64, size=v.shape, dtype=np.uint64)
    hashed = keyed_hash(v, keys, params.g)
    keep = rng.random(v.shape) < params.p
    shift = rng.integers(1, params.g, size=v.shape)
    return keys, np.where(keep, hashed, (hashed + shift) % params.g)


def olh_support_counts(keys, values, g: int, d: int, chunk: int = 1 << 22) -> np.ndarray:
    """``C(v) = |{j : H^j(v) = y^j}|`` for every ``v`` in ``[0, d)``."""
    keys = np.asarray(keys, dtype=np.uint64)
    values = np.asarray(values, dtype=np.int64)
    domain = np.arange(d, dtype=np.uint64)
    counts = np.zeros(d, dtype=np.int64)
    step = max(1, chunk // max(d, 1))
    for start in range(0, keys.size, step):
        k = keys[start : start + step, None]
        y = values[start : start + step, None]
        counts += (keyed_hash(domain[None, :], k, g) == y).sum(axis=0)
    return counts


def olh_aggregate(keys, values, params: OlhParams, d: int) -> np.ndarray:
    values = np.asarray(values)
    if values.size == 0:
        raise DegenerateError("no reports to aggregate")
    counts = olh_support_counts(keys, values, params.g, d)
    return (counts / values.size - 1.0 / params.g) / (params.p - 1.0 / params.g)


def olh_variance(params: OlhParams | PrivacyParams, n: int) -> float:
    """Approximate OLH variance ``4 e^eps / ((e^eps - 1)^2 n)`` at the optimal g."""
    privacy = params.privacy if isinstance(params, OlhParams) else params
    e = privacy.exp_eps
    return 4 * e / ((e - 1) ** 2 * n)


def choose_cfo(d: int, eps) -> str:
    """GRR when ``d - 2 < 3 e^eps`` (lower variance), otherwise OLH."""
    if d < 2:
        raise DomainError(f"need d >= 2, got {d}")
    return GRR if d - 2 < 3 * as_params(eps).exp_eps else OLH


def cfo_perturb(v, d: int, eps, seed, kind: str | None = None) -> ReportBatch:
    """Perturb with the oracle ``choose_cfo`` selects for domain size ``d``."""
    kind = kind or choose_cfo(d, eps)
    if kind == GRR:
        y = grr_perturb(v, GrrParams.make(d, eps), seed)
        return ReportBatch(GRR, {"value": y}, {"d": d, "epsilon": as_params(eps).epsilon})
    params = OlhParams.make(eps)
    keys, y = olh_perturb(v, params, seed, d=d)
    return ReportBatch(OLH, {"key": keys, "value": y}, {"d": d, "g": params.g, "epsilon": params.privacy.epsilon})


def cfo_aggregate(batch: ReportBatch) -> np.ndarray:
    d = int(batch.meta["d"])
    eps = float(batch.meta["epsilon"])
    if batch.mechanism == GRR:
        return grr_aggregate(batch["value"], GrrParams.make(d, eps))
    if batch.mechanism == OLH:
        params = OlhParams(int(batch.meta["g"]), as_params(eps))
        return olh_aggregate(batch["key"], batch["value"], params, d)
    raise DomainError(f"not a categorical oracle batch: {batch.mechanism}")


# -- HRR --------------------------------------------------------------------


def next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (int(n) - 1).bit_length()


@dataclass(frozen=True)
class HrrParams:
    order: int
    privacy: PrivacyParams

    def __post_init__(self):
        if self.order < 1 or self.order & (self.order - 1):
            raise DomainError(f"Hadamard order must be a power of 2, got {self.order}")

    @classmethod
    def for_domain(cls, d: int, eps) -> "HrrParams":
        return cls(next_pow2(d), as_params(eps))

    @property
    def keep_prob(self) -> float:
        e = self.privacy.exp_eps
        return 1.0 if math.isinf(e) else e / (e + 1)


def hadamard_entry(row, col) -> np.ndarray:
    """Sylvester Hadamard entry ``(-1)^popcount(row & col)``."""
    x = np.bitwise_and(np.asarray(row, dtype=np.int64), np.asarray(col, dtype=np.int64))
    parity = np.zeros(np.shape(x), dtype=np.int64)
    while np.any(x):
        parity ^= x & 1
        x = x >> 1
    return 1 - 2 * parity


def fwht(a) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform along the last axis."""
    a = np.array(a, dtype=float)
    m = a.shape[-1]
    h = 1
    while h < m:
        a = a.reshape(a.shape[:-1] + (m // (2 * h), 2, h))
        x, y = a[..., 0, :].copy(), a[..., 1, :].copy()
        a[..., 0, :], a[..., 1, :] = x + y, x - y
        a = a.reshape(a.shape[:-3] + (m,))
        h *= 2
    return a


def hrr_perturb(v, params: HrrParams, seed, sign=1):
    """Return ``(rows, bits)``: uniform Hadamard row and the perturbed signed entry.

    ``sign`` multiplies the true entry before perturbation, which lets Haar
    reporting encode a signed one-hot vector.
    """
    rng = as_rng(seed)
    v = _check_indices(v, params.order)
    rows = rng.integers(0, params.order, size=v.shape)
    truth = hadamard_entry(rows, v) * np.asarray(sign, dtype=np.int64)
    flip = rng.random(v.shape) >= params.keep_prob
    return rows, np.where(flip, -truth, truth)


def hrr_aggregate(rows, bits, params: HrrParams, n: int | None = None) -> np.ndarray:
    """Unbiased estimate of ``(1/n) sum_u sign_u * [v_u == j]`` for every column ``j``."""
    rows = np.asarray(rows, dtype=np.int64)
    n = rows.size if n is None else n
    if n == 0:
        raise DegenerateError("no reports to aggregate")
    per_row = np.bincount(rows, weights=np.asarray(bits, dtype=float), minlength=params.order)
    scale = 2 * params.keep_prob - 1
    # Sylvester matrix is symmetric, so column sums are a forward transform
    return fwht(per_row) / (n * scale)


# -- Norm-Sub ---------------------------------------------------------------


def norm_sub(x) -> np.ndarray:
    """Clamp negatives to zero and shift positives by a common constant to sum to 1.

    Repeats until no entry is negative (at most ``len(x)`` rounds). When the
    positive entries sum to at least 1 this equals Euclidean projection onto
    the simplex.
    """
    x = np.array(x, dtype=float)
    if not np.any(x > 0):
        raise DegenerateError("norm_sub needs at least one positive entry")
    for _ in range(x.size + 1):
        pos = x > 0
        x[~pos] = 0.0
        x[pos] -= (x.sum() - 1.0) / pos.sum()
        if not np.any(x < 0):
            break
    return x


def project_simplex(x) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-and-threshold).

    Agrees with :func:`norm_sub` whenever the positive entries sum to at
    least 1; below that, Norm-Sub is not a projection.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise DegenerateError("cannot project an empty vector")
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, x.size + 1)
    r = k[u - css / k > 0][-1]
    return np.maximum(x - css[r - 1] / r, 0.0)
