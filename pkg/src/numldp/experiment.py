"""Experiment pipelines: method registry, seeded runner, summaries and record files."""

from __future__ import annotations

import csv
import hashlib
import json
import time
import zlib
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import metrics as M
from .baselines import BinningConfig, cfo_binning_pipeline, estimate_unit_mean, variance_protocol
from .core import ConfigError, as_params, bucket_of, BucketSpec, histogram, make_rng
from .datasets import DatasetSpec, load_dataset
from .hierarchy import TreeShape, haar_reconstruct, haar_report, hh_admm, hh_aggregate, hh_leaves, hh_report
from .reconstruct import EmConfig, reconstruct, report_counts
from .wave import SHAPES, WaveShape, build_transition_matrix, gw_perturb, optimal_b

METHODS = ("sw-ems", "sw-em", "cfo-binning", "hh", "haar", "hh-admm", "sr", "pm")

DISTANCE = ("w1", "ks")
STATS = ("mean", "var")

# which metric families each method is scored on
VALID = {
    "sw-ems": {"distance", "range", "stats", "quantiles"},
    "sw-em": {"distance", "range", "stats", "quantiles"},
    "cfo-binning": {"distance", "range", "stats", "quantiles"},
    "hh-admm": {"distance", "range", "stats", "quantiles"},
    "hh": {"range"},
    "haar": {"range"},
    "sr": {"stats"},
    "pm": {"stats"},
}


def metric_family(metric: str) -> str:
    if metric in DISTANCE:
        return "distance"
    if metric in STATS:
        return "stats"
    if metric == "quantiles":
        return "quantiles"
    if metric.startswith("range:"):
        try:
            alpha = float(metric.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad range metric {metric!r}; expected range:<alpha>") from None
        if not 0 < alpha < 1:
            raise ConfigError(f"range width must lie in (0, 1), got {alpha}")
        return "range"
    raise ConfigError(f"unknown metric {metric!r}")


def valid_pairs() -> str:
    return "; ".join(f"{m}: {', '.join(sorted(VALID[m]))}" for m in METHODS)


@dataclass(frozen=True)
class MethodSpec:
    name: str
    bins: int | None = None  # cfo-binning coarse bin count
    b: float | None = None
    shape: str = "square"
    ratio: float | None = None
    d_out: int | None = None
    metrics: tuple | None = None  # overrides the experiment-wide list

    def __post_init__(self):
        if self.name not in METHODS:
            raise ConfigError(f"unknown method {self.name!r}; choose from {METHODS}")
        if self.name == "cfo-binning" and not self.bins:
            raise ConfigError("cfo-binning needs a bin count")
        if self.shape not in SHAPES:
            raise ConfigError(f"unknown wave shape {self.shape!r}")
        if self.metrics is not None:
            object.__setattr__(self, "metrics", tuple(self.metrics))

    @property
    def label(self) -> str:
        if self.name == "cfo-binning":
            return f"cfo-binning-{self.bins}"
        if not self.name.startswith("sw-"):
            return self.name
        tags = []
        if self.shape != "square":
            tags.append(self.shape if self.ratio is None else f"{self.shape}-{self.ratio:g}")
        if self.b is not None:
            tags.append(f"b={self.b:g}")
        if self.d_out is not None:
            tags.append(f"dout={self.d_out}")
        return self.name + (f"[{','.join(tags)}]" if tags else "")

    @classmethod
    def parse(cls, raw) -> "MethodSpec":
        """Accept a dict or a short string such as ``"cfo-binning-16"``."""
        if isinstance(raw, MethodSpec):
            return raw
        if isinstance(raw, str):
            if raw.startswith("cfo-binning-"):
                return cls("cfo-binning", bins=int(raw.rsplit("-", 1)[1]))
            return cls(raw)
        try:
            return cls(**raw)
        except TypeError as err:
            raise ConfigError(f"bad method spec {raw!r}: {err}") from None


@dataclass
class ExperimentConfig:
    dataset: DatasetSpec
    methods: list
    epsilons: list
    repetitions: int = 20
    metrics: list = field(default_factory=lambda: ["w1"])
    seed: int = 0
    output: str | None = None
    threads: int = 1
    range_trials: int = 1000
    paired: bool = True  # common random numbers: every method in a repetition shares one stream

    def __post_init__(self):
        if isinstance(self.dataset, dict):
            self.dataset = DatasetSpec.from_dict(self.dataset)
        self.methods = [MethodSpec.parse(m) for m in self.methods]
        self.epsilons = [float(e) for e in self.epsilons]
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.epsilons or any(not e > 0 for e in self.epsilons):
            raise ConfigError("epsilon values must be > 0")
        if not self.methods:
            raise ConfigError("at least one method is required")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate methods: {labels}")
        for m in self.methods:
            if m.name == "cfo-binning" and self.dataset.d % m.bins:
                raise ConfigError(f"bin count {m.bins} must divide d={self.dataset.d}")
            for metric in self.metrics_for(m):
                if metric_family(metric) not in VALID[m.name]:
                    raise ConfigError(
                        f"metric {metric!r} is not evaluated for {m.name}; valid pairs: {valid_pairs()}"
                    )

    def metrics_for(self, method: MethodSpec) -> tuple:
        return tuple(method.metrics if method.metrics is not None else self.metrics)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["methods"] = [{k: v for k, v in asdict(m).items() if v is not None} for m in self.methods]
        return out

    @property
    def config_hash(self) -> str:
        """Content hash of everything that affects record values."""
        body = self.to_dict()
        for key in ("output", "threads"):
            body.pop(key)
        text = json.dumps(body, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            return cls(**raw)
        except TypeError as err:
            raise ConfigError(f"bad experiment config: {err}") from None

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from None
        except json.JSONDecodeError as err:
            raise ConfigError(f"config {path} is not valid JSON: {err}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw)


@dataclass(frozen=True)
class ResultRecord:
    method: str
    dataset: str
    epsilon: float
    rep: int
    metric: str
    value: float
    seed: int
    wall_ms: float = field(default=0.0, compare=False)

    @property
    def cell(self):
        return (self.method, self.dataset, self.epsilon, self.metric)

    def sort_key(self):
        return (*self.cell, self.rep)


# -- estimation -------------------------------------------------------------


@lru_cache(maxsize=64)
def _wave_matrix(wave, d: int, d_out: int) -> np.ndarray:
    return build_transition_matrix(wave, d, d_out)


def make_wave(method: MethodSpec, eps: float) -> WaveShape:
    privacy = as_params(eps)
    b = optimal_b(privacy) if method.b is None else method.b
    ratio = {"square": 1.0, "triangle": 0.0}.get(method.shape, method.ratio)
    if ratio is None:
        raise ConfigError("trapezoid waves need a ratio")
    return WaveShape(method.shape, b, privacy, ratio)


def estimate_histogram(method: MethodSpec, values, d: int, eps: float, rng) -> np.ndarray:
    """Run one method end to end and return its ``d``-bucket histogram estimate."""
    name = method.name
    if name in ("sw-ems", "sw-em"):
        wave = make_wave(method, eps)
        d_out = method.d_out or d
        counts = report_counts(gw_perturb(values, wave, rng), wave.lo, wave.hi, d_out)
        cfg = EmConfig.ems() if name == "sw-ems" else EmConfig.em(eps)
        return reconstruct(counts, _wave_matrix(wave, d, d_out), cfg).x
    if name == "cfo-binning":
        return cfo_binning_pipeline(values, BinningConfig(method.bins, d), eps, rng)
    idx = bucket_of(values, BucketSpec(0.0, 1.0, d))
    if name == "haar":
        return haar_reconstruct(haar_report(idx, d, eps, rng), d, eps)
    shape = TreeShape(d)
    tree = hh_aggregate(hh_report(idx, shape, eps, rng), shape)
    if name == "hh":
        return hh_leaves(tree)
    if name == "hh-admm":
        return hh_admm(tree, shape).leaves
    raise ConfigError(f"{name} does not produce a histogram")


def evaluate(metric: str, truth, est, seed, trials: int = 1000) -> float:
    if metric == "w1":
        return M.wasserstein(truth, est)
    if metric == "ks":
        return M.ks_distance(truth, est)
    if metric == "mean":
        return M.mean_error(truth, est)
    if metric == "var":
        return M.variance_error(truth, est)
    if metric == "quantiles":
        return M.quantiles_mae(truth, est)
    if metric.startswith("range:"):
        return M.range_query_mae(truth, est, float(metric.split(":", 1)[1]), trials, seed)
    raise ConfigError(f"unknown metric {metric!r}")


def _stat_errors(method: str, values, metrics, eps, rng) -> dict:
    # SR and PM are scored against the raw sample moments, not bucket midpoints
    out = {}
    if "mean" in metrics:
        out["mean"] = abs(estimate_unit_mean(values, method, eps, rng) - float(values.mean()))
    if "var" in metrics:
        _, var = variance_protocol(values, method, eps, rng)
        out["var"] = abs(var - float(values.var()))
    return out


def _cell_seed(master: int, method: MethodSpec, eps: float, rep: int, paired: bool) -> tuple:
    # keyed by content, so adding a method or an epsilon leaves other cells untouched
    tag = 0 if paired else zlib.crc32(method.label.encode())
    return (master, tag, int(round(eps * 1e6)), rep)


def run_cell(cfg: ExperimentConfig, values, truth, method: MethodSpec, eps_index: int, rep: int) -> list:
    eps = cfg.epsilons[eps_index]
    keys = _cell_seed(cfg.seed, method, eps, rep, cfg.paired)
    rng = make_rng(*keys)
    wanted = cfg.metrics_for(method)
    start = time.perf_counter()
    if method.name in ("sr", "pm"):
        scores = _stat_errors(method.name, values, wanted, eps, rng)
    else:
        est = estimate_histogram(method, values, truth.size, eps, rng)
        query_seed = make_rng(*keys, 1)
        scores = {m: evaluate(m, truth, est, query_seed, cfg.range_trials) for m in wanted}
    ms = (time.perf_counter() - start) * 1e3
    seed_id = int(make_rng(*keys).integers(0, 2**63))
    return [
        ResultRecord(method.label, cfg.dataset.name, eps, rep, m, float(scores[m]), seed_id, ms)
        for m in wanted
    ]


def run_experiment(cfg: ExperimentConfig, progress=None) -> list:
    """Every (method, epsilon, repetition) cell; output is sorted and independent of thread count."""
    values = load_dataset(cfg.dataset, make_rng(cfg.seed, 0xDA7A))
    truth = histogram(values, cfg.dataset.d)
    cells = [
        (m, ei, r)
        for m in cfg.methods
        for ei in range(len(cfg.epsilons))
        for r in range(cfg.repetitions)
    ]

    def job(cell):
        out = run_cell(cfg, values, truth, *cell)
        if progress is not None:
            progress(cell, out)
        return out

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            batches = list(pool.map(job, cells))
    else:
        batches = [job(c) for c in cells]
    records = [r for batch in batches for r in batch]
    return sorted(records, key=ResultRecord.sort_key)


# -- summaries and files ----------------------------------------------------


@dataclass(frozen=True)
class SummaryRow:
    method: str
    dataset: str
    epsilon: float
    metric: str
    mean: float
    std: float
    count: int


def summarize(records) -> list:
    """Mean and sample standard deviation per (method, dataset, epsilon, metric)."""
    groups = defaultdict(list)
    for r in records:
        groups[r.cell].append(r.value)
    rows = []
    for cell in sorted(groups):
        v = np.asarray(groups[cell])
        std = float(v.std(ddof=1)) if v.size > 1 else 0.0
        rows.append(SummaryRow(*cell, float(v.mean()), std, int(v.size)))
    return rows


def record_line(r: ResultRecord, config_hash: str) -> str:
    body = {k: v for k, v in asdict(r).items() if k != "wall_ms"}
    body["config_hash"] = config_hash
    return json.dumps(body, sort_keys=True)


def write_outputs(records, cfg: ExperimentConfig, out_dir) -> dict:
    """``records.jsonl`` (no timings, so reruns are byte-identical), ``summary.csv`` and ``timings.jsonl``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.config_hash
    records = sorted(records, key=ResultRecord.sort_key)
    paths = {"records": out / "records.jsonl", "summary": out / "summary.csv", "timings": out / "timings.jsonl"}
    paths["records"].write_text("".join(record_line(r, h) + "\n" for r in records))
    with paths["summary"].open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "dataset", "epsilon", "metric", "mean", "std", "count", "config_hash", "seed"])
        for row in summarize(records):
            w.writerow([*asdict(row).values(), h, cfg.seed])
    paths["timings"].write_text(
        "".join(
            json.dumps({"method": r.method, "epsilon": r.epsilon, "rep": r.rep, "metric": r.metric, "wall_ms": r.wall_ms})
            + "\n"
            for r in records
        )
    )
    return paths


def read_records(path) -> list:
    out = []
    for line in Path(path).read_text().splitlines():
        raw = json.loads(line)
        raw.pop("config_hash", None)
        out.append(ResultRecord(**raw))
    return out


def summary_table(rows) -> str:
    lines = [f"{'method':<28}{'eps':>6}  {'metric':<11}{'mean':>12}{'std':>12}"]
    for r in rows:
        lines.append(f"{r.method:<28}{r.epsilon:>6g}  {r.metric:<11}{r.mean:>12.5g}{r.std:>12.3g}")
    return "\n".join(lines)
