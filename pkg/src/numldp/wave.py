"""Square Wave and General Wave randomizers over ``[0, 1]``.

A wave mechanism reports ``v~`` in ``[-b, 1 + b]`` with density
``W(v~ - v)``, where ``W`` equals ``q`` outside ``[-b, b]`` and lies in
``[q, e^eps q]`` inside. Square Wave (SW) is the flat-top member of the
family. Everything here is expressed through the *excess* ``f = W - q``
on ``[-b, b]``, its running integral ``G`` and the second integral ``K``,
which give output CDFs and bucket transition probabilities in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConfigError, DomainError, PrivacyParams, as_params, as_rng


def optimal_b(eps) -> float:
    """Half-width maximizing the mutual-information upper bound.

    ``b = (eps e^eps - e^eps + 1) / (2 e^eps (e^eps - 1 - eps))``, evaluated
    in a cancellation-free form. ``eps == 0`` returns the limit 1/2.
    """
    eps = float(eps.epsilon if isinstance(eps, PrivacyParams) else eps)
    if eps < 0 or math.isnan(eps):
        raise DomainError(f"epsilon must be >= 0, got {eps}")
    if eps < 1e-5:
        return 0.5 - eps / 3.0
    if eps > 700:
        return 0.0
    # numerator and denominator divided by e^eps
    return (eps + math.expm1(-eps)) / (2.0 * (math.expm1(eps) - eps))


def mutual_info_bound(b: float, eps) -> float:
    """``log((2b+1)/(2b e^eps + 1)) + 2b eps e^eps / (2b e^eps + 1)``."""
    if b <= 0:
        raise DomainError(f"b must be > 0, got {b}")
    privacy = as_params(eps)
    e = privacy.exp_eps
    return math.log((2 * b + 1) / (2 * b * e + 1)) + 2 * b * privacy.epsilon * e / (2 * b * e + 1)


# -- square wave ------------------------------------------------------------


@dataclass(frozen=True)
class SwParams:
    b: float
    privacy: PrivacyParams
    p: float = field(init=False)
    q: float = field(init=False)

    def __post_init__(self):
        if not 0 <= self.b <= 0.5:
            raise DomainError(f"b must lie in [0, 1/2], got {self.b}")
        e = self.privacy.exp_eps
        if math.isinf(e):
            if self.b == 0:
                raise DomainError("b = 0 with infinite epsilon has no density")
            p, q = 1.0 / (2 * self.b), 0.0
        else:
            p = e / (2 * self.b * e + 1)
            q = 1.0 / (2 * self.b * e + 1)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def make(cls, eps, b: float | None = None) -> "SwParams":
        privacy = as_params(eps)
        return cls(optimal_b(privacy) if b is None else float(b), privacy)

    @property
    def lo(self) -> float:
        return -self.b

    @property
    def hi(self) -> float:
        return 1.0 + self.b

    def excess_k(self, t) -> np.ndarray:
        """Second antiderivative of the excess ``(p - q) 1[|z| <= b]``."""
        t = np.asarray(t, dtype=float)
        b = self.b
        inner = 0.5 * (t + b) ** 2
        outer = 2 * b * b + 2 * b * (t - b)
        return (self.p - self.q) * np.where(t <= -b, 0.0, np.where(t < b, inner, outer))

    def as_shape(self) -> "WaveShape":
        return WaveShape.square(self.b, self.privacy)


def _check_unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if np.any(~np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
        raise DomainError("wave inputs must lie in [0, 1]")
    return v


def sw_perturb(v, params: SwParams, seed) -> np.ndarray:
    """Square Wave report: uniform on ``[v-b, v+b]`` w.p. ``2bp``, else uniform on the rest."""
    rng = as_rng(seed)
    v = _check_unit(v)
    near = rng.random(v.shape) < 2 * params.b * params.p
    u = rng.random(v.shape)
    # the far region [-b, v-b) U (v+b, 1+b] has total length 1
    far = np.where(u < v, u - params.b, u + params.b)
    return np.where(near, v + params.b * (2 * u - 1), far)


# -- general wave -----------------------------------------------------------

SHAPES = ("square", "trapezoid", "triangle")


@dataclass(frozen=True)
class WaveShape:
    """Symmetric trapezoidal wave: bottom width ``2b``, top width ``2b * ratio``.

    ``ratio == 1`` is the square wave and ``ratio == 0`` the triangle. By
    default the peak sits at the ceiling ``e^eps q`` and ``q`` follows from
    normalization; passing ``q`` explicitly instead solves for the peak and
    rejects shapes that would exceed ``e^eps q``.
    """

    kind: str
    b: float
    privacy: PrivacyParams
    ratio: float = 1.0
    q: float | None = None
    height: float = field(init=False)

    def __post_init__(self):
        if self.kind not in SHAPES:
            raise ConfigError(f"unknown wave shape {self.kind!r}; choose from {SHAPES}")
        if not 0 < self.b <= 0.5:
            raise DomainError(f"b must lie in (0, 1/2], got {self.b}")
        if not 0 <= self.ratio <= 1:
            raise DomainError(f"ratio must lie in [0, 1], got {self.ratio}")
        e = self.privacy.exp_eps
        area = self.b * (1 + self.ratio)  # excess area per unit height
        if self.q is None:
            q = 0.0 if math.isinf(e) else 1.0 / (2 * self.b + 1 + (e - 1) * area)
            object.__setattr__(self, "q", q)
        h = (1 - (2 * self.b + 1) * self.q) / area
        if h < -1e-12 or (not math.isinf(e) and h > (e - 1) * self.q * (1 + 1e-12)):
            raise DomainError(
                f"{self.kind} wave with b={self.b}, q={self.q} needs peak outside [q, e^eps q]"
            )
        object.__setattr__(self, "height", max(h, 0.0))

    @classmethod
    def square(cls, b: float, eps) -> "WaveShape":
        return cls("square", b, as_params(eps), 1.0)

    @classmethod
    def trapezoid(cls, b: float, eps, ratio: float) -> "WaveShape":
        return cls("trapezoid", b, as_params(eps), ratio)

    @classmethod
    def triangle(cls, b: float, eps) -> "WaveShape":
        return cls("triangle", b, as_params(eps), 0.0)

    @property
    def lo(self) -> float:
        return -self.b

    @property
    def hi(self) -> float:
        return 1.0 + self.b

    @property
    def knots(self) -> np.ndarray:
        b, r = self.b, self.ratio
        return np.array([-b, -r * b, r * b, b])

    @property
    def knot_values(self) -> np.ndarray:
        h = self.height
        return np.array([0.0, h, h, 0.0])

    def W(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        inside = np.abs(z) <= self.b
        return self.q + np.where(inside, self._excess(z), 0.0)

    def _excess(self, z):
        z = np.clip(np.asarray(z, dtype=float), -self.b, self.b)
        az = np.abs(z)
        top = self.ratio * self.b
        slope_len = self.b - top
        if slope_len <= 0:
            return np.full(z.shape, self.height)
        return self.height * np.clip((self.b - az) / slope_len, 0.0, 1.0)

    def _segments(self):
        z, f = self.knots, self.knot_values
        for k in range(3):
            if z[k + 1] > z[k]:
                yield z[k], z[k + 1], f[k], f[k + 1]

    def excess_k(self, t) -> np.ndarray:
        """``K(t) = int_{-inf}^t (t - z) f(z) dz``; Simpson is exact on each linear piece."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for z0, z1, f0, f1 in self._segments():
            hi = np.clip(t, z0, z1)
            mid = 0.5 * (z0 + hi)
            slope = (f1 - f0) / (z1 - z0)

            def g(z):
                return (t - z) * (f0 + slope * (z - z0))

            out += (hi - z0) / 6.0 * (g(z0) + 4 * g(mid) + g(hi))
        return out

    def excess_cdf(self, t) -> np.ndarray:
        """``G(t) = int_{-inf}^t f(z) dz``."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for z0, z1, f0, f1 in self._segments():
            hi = np.clip(t, z0, z1)
            f_hi = f0 + (f1 - f0) / (z1 - z0) * (hi - z0)
            out += 0.5 * (hi - z0) * (f0 + f_hi)
        return out

    def sample_offsets(self, size, rng: np.random.Generator) -> np.ndarray:
        """Draw ``z`` with density proportional to the excess ``f``."""
        segs = list(self._segments())
        masses = np.array([0.5 * (z1 - z0) * (f0 + f1) for z0, z1, f0, f1 in segs])
        cum = np.cumsum(masses)
        u = rng.random(size) * cum[-1]
        idx = np.minimum(np.searchsorted(cum, u, side="right"), len(segs) - 1)
        start = np.concatenate([[0.0], cum[:-1]])
        z0, z1, f0, f1 = (np.array(col)[idx] for col in zip(*segs))
        m = np.clip(u - start[idx], 0.0, None)
        length = z1 - z0
        # inverse of the quadratic segment CDF, written without dividing by the slope
        disc = np.maximum(f0 * f0 + 2 * (f1 - f0) * m / length, 0.0)
        denom = f0 + np.sqrt(disc)
        t = np.where(denom > 0, 2 * m / np.where(denom > 0, denom, 1.0), 0.0)
        return z0 + np.clip(t, 0.0, length)


def gw_perturb(v, shape: WaveShape, seed) -> np.ndarray:
    """General Wave report with density ``W(v~ - v)`` on ``[-b, 1 + b]``.

    Drawn as a mixture: the floor ``q`` spread over the whole output domain
    (mass ``(2b+1) q``) plus ``v`` shifted by an offset from the excess.
    """
    rng = as_rng(seed)
    v = _check_unit(v)
    floor = rng.random(v.shape) < (2 * shape.b + 1) * shape.q
    background = rng.uniform(-shape.b, 1 + shape.b, size=v.shape)
    return np.where(floor, background, v + shape.sample_offsets(v.shape, rng))


def output_cdf(wave: SwParams | WaveShape, v: float, t) -> np.ndarray:
    """CDF of the report for input ``v``, evaluated at ``t`` in ``[-b, 1 + b]``."""
    shape = wave.as_shape() if isinstance(wave, SwParams) else wave
    t = np.clip(np.asarray(t, dtype=float), shape.lo, shape.hi)
    return (t + shape.b) * shape.q + shape.excess_cdf(t - v)


def output_w1(wave: SwParams | WaveShape, v1: float, v2: float) -> float:
    """Exact W1 between the report distributions of two inputs.

    The CDFs are ordered (the smaller input's dominates), so the distance is
    the signed area between them, which ``K`` gives in closed form.
    """
    lo, hi = -wave.b, 1 + wave.b
    a, c = min(v1, v2), max(v1, v2)
    k = wave.excess_k
    area = (k(hi - a) - k(lo - a)) - (k(hi - c) - k(lo - c))
    return float(area)


def shift_w1(wave: SwParams | WaveShape, delta: float) -> float:
    """``delta * (1 - (2b + 1) q)``: W1 between outputs for inputs ``delta`` apart."""
    return delta * (1 - (2 * wave.b + 1) * wave.q)


# -- transition matrices ----------------------------------------------------


def build_transition_matrix(wave: SwParams | WaveShape, d: int, d_out: int | None = None) -> np.ndarray:
    """``M[j, i]``: probability a report lands in output bucket ``j`` for input uniform in bucket ``i``.

    ``Pr[v~ in [l, r] | v] = q (r - l) + G(r - v) - G(l - v)``; averaging over
    ``v`` in ``[a, a + w]`` turns each ``G`` term into a difference of ``K``.
    Exact for any piecewise-linear wave.
    """
    d_out = d if d_out is None else d_out
    if d < 1 or d_out < 1:
        raise DomainError("bucket counts must be >= 1")
    b = wave.b
    a = np.arange(d + 1) / d
    e = -b + (1 + 2 * b) * np.arange(d_out + 1) / d_out
    k = wave.excess_k

    def avg_g(x):
        # (1/w) int_{a_i}^{a_{i+1}} G(x - v) dv for every output edge x and input bucket i
        return (k(x[:, None] - a[None, :-1]) - k(x[:, None] - a[None, 1:])) * d

    mass = avg_g(e[1:]) - avg_g(e[:-1])
    M = wave.q * np.diff(e)[:, None] + mass
    return np.clip(M, 0.0, None)


# -- discrete square wave ---------------------------------------------------


def discrete_b(eps, d: int) -> int:
    if d < 1:
        raise DomainError(f"d must be >= 1, got {d}")
    return int(math.floor(optimal_b(eps) * d))


@dataclass(frozen=True)
class DiscreteSwParams:
    d: int
    b: int
    privacy: PrivacyParams
    p: float = field(init=False)
    q: float = field(init=False)

    def __post_init__(self):
        if self.d < 1 or self.b < 0:
            raise DomainError(f"need d >= 1 and b >= 0, got d={self.d}, b={self.b}")
        e = self.privacy.exp_eps
        w = 2 * self.b + 1
        if math.isinf(e):
            p, q = 1.0 / w, 0.0
        else:
            p = e / (w * e + self.d - 1)
            q = 1.0 / (w * e + self.d - 1)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @classmethod
    def make(cls, d: int, eps, b: int | None = None) -> "DiscreteSwParams":
        privacy = as_params(eps)
        return cls(d, discrete_b(privacy, d) if b is None else int(b), privacy)

    @property
    def d_out(self) -> int:
        return self.d + 2 * self.b


def sw_perturb_discrete(v, params: DiscreteSwParams, seed) -> np.ndarray:
    """Discrete SW: output ``j`` has probability ``p`` when ``v <= j <= v + 2b``, else ``q``."""
    rng = as_rng(seed)
    v = np.asarray(v)
    if np.any(v < 0) or np.any(v >= params.d) or np.any(v != np.floor(v)):
        raise DomainError(f"discrete SW input outside [0, {params.d})")
    v = v.astype(np.int64)
    w = 2 * params.b + 1
    near = rng.random(v.shape) < w * params.p
    offset = rng.integers(0, w, size=v.shape)
    r = rng.integers(0, max(params.d - 1, 1), size=v.shape)
    far = np.where(r < v, r, r + w)
    return np.where(near, v + offset, far)


def discrete_transition_matrix(params: DiscreteSwParams) -> np.ndarray:
    j = np.arange(params.d_out)[:, None]
    i = np.arange(params.d)[None, :]
    near = (j >= i) & (j <= i + 2 * params.b)
    return np.where(near, params.p, params.q)
