"""Shared types, bucketization and the seeded randomness contract."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np


class NumldpError(Exception):
    """Base class for library errors."""


class DomainError(NumldpError, ValueError):
    """An input lies outside the domain an operation accepts."""


class ConfigError(NumldpError, ValueError):
    """Invalid experiment or method configuration."""


class DataError(NumldpError, ValueError):
    """Unreadable, malformed, or empty input data."""


class DegenerateError(NumldpError, ArithmeticError):
    """A numerical degeneracy (zero denominator, log of zero, empty support)."""


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    exp_eps: float = field(init=False)

    def __post_init__(self):
        if not (self.epsilon > 0):
            raise DomainError(f"epsilon must be > 0, got {self.epsilon}")
        object.__setattr__(self, "exp_eps", math.exp(self.epsilon))


def as_params(eps: float | PrivacyParams) -> PrivacyParams:
    return eps if isinstance(eps, PrivacyParams) else PrivacyParams(float(eps))


@dataclass(frozen=True)
class BucketSpec:
    """Uniform partition of ``[lo, hi]`` into ``d`` buckets, last bucket closed."""

    lo: float = 0.0
    hi: float = 1.0
    d: int = 1

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"need lo < hi, got [{self.lo}, {self.hi}]")
        if self.d < 1:
            raise DomainError(f"need d >= 1, got {self.d}")

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.d

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.width * np.arange(self.d + 1)

    def bucket_of(self, v):
        return bucket_of(v, self)


def bucket_of(v, spec: BucketSpec):
    """Index of the bucket holding ``v``; ``v == hi`` maps to ``d - 1``.

    Accepts a scalar or an array and returns the same shape.
    """
    arr = np.asarray(v, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < spec.lo) or np.any(arr > spec.hi):
        raise DomainError(f"values outside [{spec.lo}, {spec.hi}]")
    idx = np.floor((arr - spec.lo) / (spec.hi - spec.lo) * spec.d).astype(np.int64)
    idx = np.minimum(idx, spec.d - 1)
    return int(idx) if idx.ndim == 0 else idx


def normalize(h) -> np.ndarray:
    """Scale a nonnegative count/weight vector to sum to one."""
    h = np.asarray(h, dtype=float)
    total = h.sum()
    if h.size == 0 or not total > 0:
        raise DegenerateError("cannot normalize a histogram with zero total")
    return h / total


def histogram(values, d: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Normalized histogram of raw values over ``d`` uniform buckets."""
    spec = BucketSpec(lo, hi, d)
    counts = np.bincount(bucket_of(np.asarray(values, dtype=float), spec), minlength=d)
    return normalize(counts)


def is_simplex(x, tol: float = 1e-9) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(x.size >= 1 and np.all(x >= -tol) and abs(x.sum() - 1.0) <= tol)


@dataclass(frozen=True)
class ReportBatch:
    """Reports from ``n`` users; ``columns`` holds one array per report field.

    Field layout by mechanism: ``value`` (sw, grr, sr, pm, sw-discrete),
    ``key``/``value`` (olh), ``row``/``bit`` (hrr), ``layer`` plus the layer
    oracle's fields (hh, haar).
    """

    mechanism: str
    columns: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lengths = {len(np.asarray(c)) for c in self.columns.values()}
        if len(lengths) > 1:
            raise DataError(f"report columns have unequal lengths {sorted(lengths)}")

    @property
    def n(self) -> int:
        if not self.columns:
            return 0
        return len(next(iter(self.columns.values())))

    def __getitem__(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name])

    def select(self, mask) -> "ReportBatch":
        return ReportBatch(
            self.mechanism,
            {k: np.asarray(v)[mask] for k, v in self.columns.items()},
            dict(self.meta),
        )


# -- randomness -------------------------------------------------------------

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Counter-based (Philox) generator for the stream named by ``(seed, *keys)``.

    Streams for distinct key tuples are independent, so the result of any
    cell depends only on its key, never on scheduling order.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) & 0xFFFFFFFFFFFFFFFF for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def as_rng(seed: Any) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ConfigError("a seed or Generator is required; unseeded randomness is not allowed")
    return make_rng(int(seed))


def mix64(x) -> np.ndarray:
    """SplitMix64 finalizer, elementwise on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(x).astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z


def keyed_hash(values, keys, g: int) -> np.ndarray:
    """Hash ``values`` under per-user ``keys`` into ``[0, g)``; broadcasts."""
    v = np.asarray(values).astype(np.uint64)
    k = np.asarray(keys).astype(np.uint64)
    return (mix64(k ^ mix64(v)) % np.uint64(g)).astype(np.int64)
