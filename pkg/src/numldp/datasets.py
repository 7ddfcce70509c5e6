"""Dataset synthesis and ingestion, mapped onto ``[0, 1]``."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ConfigError, DataError, as_rng


class UnreadableDataError(DataError):
    pass


class MalformedDataError(DataError):
    pass


class EmptyDataError(DataError):
    pass


# preset -> (keep lo inclusive, keep hi exclusive, divisor); None hi keeps the closed edge
PRESETS = {
    "unit": (0.0, None, 1.0),
    "taxi": (0.0, None, 86400.0),
    "income": (0.0, 524288.0, 524288.0),
    "retirement": (0.0, 60000.0, 60000.0),
}

DEFAULT_BUCKETS = {"beta": 256, "unit": 1024, "taxi": 1024, "income": 1024, "retirement": 1024}


@dataclass(frozen=True)
class DatasetSpec:
    source: str = "beta"
    a: float = 5.0
    b: float = 2.0
    n: int = 100_000
    path: str | None = None
    preset: str = "unit"
    column: int = 0
    buckets: int | None = None
    max_n: int | None = None

    def __post_init__(self):
        if self.source not in ("beta", "csv"):
            raise ConfigError(f"dataset source must be 'beta' or 'csv', got {self.source!r}")
        if self.source == "beta" and (self.a <= 0 or self.b <= 0 or self.n <= 0):
            raise ConfigError("beta dataset needs a, b, n > 0")
        if self.source == "csv":
            if not self.path:
                raise ConfigError("csv dataset needs a path")
            if self.preset not in PRESETS:
                raise ConfigError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")

    @property
    def name(self) -> str:
        if self.source == "beta":
            return f"beta({self.a:g},{self.b:g})"
        return f"{self.preset}:{Path(self.path).name}"

    @property
    def d(self) -> int:
        if self.buckets is not None:
            return int(self.buckets)
        return DEFAULT_BUCKETS["beta" if self.source == "beta" else self.preset]

    @classmethod
    def from_dict(cls, raw: dict) -> "DatasetSpec":
        try:
            return cls(**raw)
        except TypeError as err:
            raise ConfigError(f"bad dataset spec: {err}") from None


def read_values(path, column: int = 0) -> np.ndarray:
    """One number per line (or the ``column``-th comma field); a non-numeric first line is a header."""
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as err:
        raise UnreadableDataError(f"cannot read {path}: {err}") from None
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        try:
            values.append(float(fields[column]))
        except (ValueError, IndexError):
            if lineno == 1:
                continue
            raise MalformedDataError(f"{path}:{lineno}: not a number: {line!r}") from None
    return np.asarray(values, dtype=float)


def preprocess(raw, preset: str) -> np.ndarray:
    lo, hi, div = PRESETS[preset]
    raw = np.asarray(raw, dtype=float)
    keep = np.isfinite(raw) & (raw >= lo)
    keep &= (raw < hi) if hi is not None else (raw <= div)
    out = raw[keep] / div
    if out.size == 0:
        raise EmptyDataError(f"no values left after the {preset} filter")
    return out


def load_dataset(spec: DatasetSpec, seed=0) -> np.ndarray:
    rng = as_rng(seed)
    if spec.source == "beta":
        values = rng.beta(spec.a, spec.b, size=spec.n)
    else:
        values = preprocess(read_values(spec.path, spec.column), spec.preset)
    if spec.max_n is not None and values.size > spec.max_n:
        values = values[np.sort(rng.choice(values.size, size=spec.max_n, replace=False))]
    return values
