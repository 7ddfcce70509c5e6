"""Command-line entry point: ``numldp {gen,perturb,estimate,eval,experiment}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .baselines import from_pm1, mean_estimate, pm_perturb, sr_perturb, to_pm1
from .core import (
    BucketSpec,
    ConfigError,
    DataError,
    DegenerateError,
    DomainError,
    ReportBatch,
    as_params,
    bucket_of,
    histogram,
    make_rng,
)
from .datasets import read_values
from .experiment import ExperimentConfig, evaluate, metric_family, run_experiment, summarize, summary_table, write_outputs
from .hierarchy import TreeShape, haar_reconstruct, haar_report, hh_admm, hh_aggregate, hh_leaves, hh_report
from .oracles import HrrParams, cfo_aggregate, cfo_perturb, hrr_aggregate, hrr_perturb, norm_sub
from .reconstruct import EmConfig, reconstruct, report_counts
from .wave import (
    DiscreteSwParams,
    SwParams,
    build_transition_matrix,
    discrete_transition_matrix,
    sw_perturb,
    sw_perturb_discrete,
)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DEGENERATE = 0, 2, 3, 4

MECHANISMS = ("sw", "sw-discrete", "grr", "olh", "hrr", "sr", "pm", "hh", "haar")
ESTIMATORS = ("ems", "em", "normsub", "hh", "haar", "hh-admm", "mean")
# report mechanism each estimator accepts
ACCEPTS = {
    "ems": ("sw", "sw-discrete"),
    "em": ("sw", "sw-discrete"),
    "normsub": ("grr", "olh", "hrr"),
    "hh": ("hh",),
    "hh-admm": ("hh",),
    "haar": ("haar",),
    "mean": ("sr", "pm"),
}


# -- file helpers -----------------------------------------------------------


def load_unit_values(path) -> np.ndarray:
    values = read_values(path)
    if values.size == 0:
        raise DataError(f"{path} holds no values")
    if np.any(~np.isfinite(values)) or values.min() < 0 or values.max() > 1:
        raise DataError(f"{path}: values must lie in [0, 1]")
    return values


def write_column(path, values) -> None:
    Path(path).write_text("".join(f"{v:.17g}\n" for v in np.ravel(values)))


def save_batch(batch: ReportBatch, path) -> None:
    body = {
        "mechanism": batch.mechanism,
        "meta": batch.meta,
        "columns": {k: np.asarray(v).tolist() for k, v in batch.columns.items()},
    }
    # uint64 hash keys do not survive a float round trip; store them as strings
    if "key" in batch.columns:
        body["columns"]["key"] = [str(int(k)) for k in batch.columns["key"]]
    Path(path).write_text(json.dumps(body))


def load_batch(path) -> ReportBatch:
    try:
        raw = json.loads(Path(path).read_text())
        cols = dict(raw["columns"])
        if "key" in cols:
            cols["key"] = np.array([int(k) for k in cols["key"]], dtype=np.uint64)
        for name in ("value", "layer", "row", "bit"):
            if name in cols:
                arr = np.asarray(cols[name])
                cols[name] = arr if arr.dtype.kind == "f" else arr.astype(np.int64)
        meta = raw["meta"]
        if "oracles" in meta:
            meta["oracles"] = {int(k): tuple(v) for k, v in meta["oracles"].items()}
        return ReportBatch(raw["mechanism"], cols, meta)
    except OSError as err:
        raise DataError(f"cannot read {path}: {err}") from None
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
        raise DataError(f"{path} is not a report file: {err}") from None


# -- subcommands ------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.n < 1 or args.a <= 0 or args.b <= 0:
        raise ConfigError("gen needs n >= 1 and a, b > 0")
    values = make_rng(args.seed, 0x6E).beta(args.a, args.b, size=args.n)
    write_column(args.out, values)
    return EXIT_OK


def perturb_values(values, mechanism: str, eps: float, d: int, rng, b=None) -> ReportBatch:
    meta = {"epsilon": eps}
    if mechanism == "sw":
        params = SwParams.make(eps, b)
        return ReportBatch("sw", {"value": sw_perturb(values, params, rng)}, {**meta, "b": params.b})
    if mechanism in ("sr", "pm"):
        fn = sr_perturb if mechanism == "sr" else pm_perturb
        return ReportBatch(mechanism, {"value": fn(to_pm1(values), eps, rng)}, meta)
    idx = bucket_of(values, BucketSpec(0.0, 1.0, d))
    if mechanism == "sw-discrete":
        params = DiscreteSwParams.make(d, eps, None if b is None else int(b))
        vals = sw_perturb_discrete(idx, params, rng)
        return ReportBatch("sw-discrete", {"value": vals}, {**meta, "d": d, "b": params.b})
    if mechanism in ("grr", "olh"):
        return cfo_perturb(idx, d, eps, rng, kind=mechanism)
    if mechanism == "hrr":
        params = HrrParams.for_domain(d, eps)
        rows, bits = hrr_perturb(idx, params, rng)
        return ReportBatch("hrr", {"row": rows, "bit": bits}, {**meta, "d": d, "order": params.order})
    if mechanism == "hh":
        return hh_report(idx, TreeShape(d), eps, rng)
    if mechanism == "haar":
        return haar_report(idx, d, eps, rng)
    raise ConfigError(f"unknown mechanism {mechanism!r}")


def cmd_perturb(args) -> int:
    values = load_unit_values(args.inp)
    batch = perturb_values(values, args.mechanism, args.epsilon, args.buckets, make_rng(args.seed, 0x9E), args.b)
    save_batch(batch, args.out)
    return EXIT_OK


def estimate_batch(batch: ReportBatch, method: str, eps: float, d: int, d_out=None) -> np.ndarray:
    if batch.mechanism not in ACCEPTS[method]:
        raise ConfigError(f"{method} cannot read {batch.mechanism} reports; it expects {ACCEPTS[method]}")
    if abs(float(batch.meta["epsilon"]) - eps) > 1e-12:
        raise ConfigError(f"--epsilon {eps} differs from the reports' epsilon {batch.meta['epsilon']}")
    declared = batch.meta.get("d")
    if declared is not None and batch.mechanism != "sw" and int(declared) != d:
        raise ConfigError(f"--buckets {d} differs from the reports' domain size {declared}")
    if method == "mean":
        return np.array([float(from_pm1(mean_estimate(batch["value"])))])
    if method in ("ems", "em"):
        cfg = EmConfig.ems() if method == "ems" else EmConfig.em(eps)
        if batch.mechanism == "sw":
            params = SwParams.make(eps, batch.meta["b"])
            d_out = d_out or d
            counts = report_counts(batch["value"], params.lo, params.hi, d_out)
            Mx = build_transition_matrix(params, d, d_out)
        else:
            params = DiscreteSwParams(d, int(batch.meta["b"]), as_params(eps))
            counts = np.bincount(batch["value"].astype(np.int64), minlength=params.d_out)
            Mx = discrete_transition_matrix(params)
        return reconstruct(counts, Mx, cfg).x
    if method == "normsub":
        if batch.mechanism == "hrr":
            params = HrrParams(int(batch.meta["order"]), as_params(eps))
            raw = hrr_aggregate(batch["row"], batch["bit"], params)[:d]
        else:
            raw = cfo_aggregate(batch)
        return norm_sub(raw)
    if method == "haar":
        return haar_reconstruct(batch, d, eps)
    shape = TreeShape(d, int(batch.meta.get("beta", 4)))
    tree = hh_aggregate(batch, shape)
    return hh_leaves(tree) if method == "hh" else hh_admm(tree, shape).leaves


def cmd_estimate(args) -> int:
    batch = load_batch(args.inp)
    est = estimate_batch(batch, args.method, args.epsilon, args.buckets, args.d_out)
    write_column(args.out, est)
    return EXIT_OK


def cmd_eval(args) -> int:
    est = read_values(args.estimate)
    if est.size == 0:
        raise DataError(f"{args.estimate} holds no estimate")
    truth = read_values(args.truth)
    if args.truth_kind == "values":
        truth = histogram(load_unit_values(args.truth), est.size)
    elif truth.size != est.size:
        raise DataError(f"truth has {truth.size} buckets, estimate has {est.size}")
    names = [m.strip() for m in args.metrics.split(",") if m.strip()]
    for m in names:
        metric_family(m)
    query_rng = make_rng(args.seed, 0xE7)
    scores = {m: evaluate(m, truth, est, query_rng, args.trials) for m in names}
    text = json.dumps(scores, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    overrides = {k: getattr(args, k) for k in ("seed", "threads", "repetitions") if getattr(args, k, None) is not None}
    if overrides:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), **overrides})
    out_dir = args.out or cfg.output or f"results/{cfg.config_hash}"
    records = run_experiment(cfg)
    paths = write_outputs(records, cfg, out_dir)
    print(summary_table(summarize(records)))
    print(f"records: {paths['records']}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _globals(default):
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=default, help="master seed (default 0, or the config's)")
    p.add_argument("--threads", type=int, default=default, help="worker threads for experiments")
    p.add_argument("--repetitions", type=int, default=default, help="override repetition count")
    return p


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    parser = argparse.ArgumentParser(prog="numldp", description=__doc__, parents=[_globals(None)])
    common = _globals(argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="synthesize a Beta dataset")
    g.add_argument("--dist", choices=["beta"], default="beta")
    g.add_argument("--a", type=float, default=5.0)
    g.add_argument("--b", type=float, default=2.0)
    g.add_argument("--n", type=int, default=100_000)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    p = sub.add_parser("perturb", parents=[common], help="randomize each value locally")
    p.add_argument("--mechanism", choices=MECHANISMS, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--in", dest="inp", required=True, help="values in [0, 1], one per line")
    p.add_argument("--out", required=True)
    p.add_argument("--buckets", type=int, default=256, help="domain size for categorical mechanisms")
    p.add_argument("--b", type=float, default=None, help="wave half-width (buckets for sw-discrete)")
    p.set_defaults(func=cmd_perturb)

    e = sub.add_parser("estimate", parents=[common], help="aggregate reports into a histogram")
    e.add_argument("--method", choices=ESTIMATORS, required=True)
    e.add_argument("--epsilon", type=float, required=True)
    e.add_argument("--buckets", type=int, required=True)
    e.add_argument("--d-out", type=int, default=None, help="report buckets for continuous SW")
    e.add_argument("--in", dest="inp", required=True)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_estimate)

    v = sub.add_parser("eval", parents=[common], help="score an estimate against the truth")
    v.add_argument("--truth", required=True)
    v.add_argument("--truth-kind", choices=["values", "histogram"], default="values")
    v.add_argument("--estimate", required=True)
    v.add_argument("--metrics", default="w1,ks,range:0.1,range:0.4,mean,var,quantiles")
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_eval)

    x = sub.add_parser("experiment", parents=[common], help="run a configured experiment grid")
    x.add_argument("--config", required=True)
    x.add_argument("--out", default=None, help="output directory")
    x.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is None and args.command != "experiment":
        args.seed = 0
    if getattr(args, "epsilon", 1.0) <= 0:
        print("config error: --epsilon must be > 0", file=sys.stderr)
        return EXIT_CONFIG
    for flag in ("buckets", "threads", "repetitions"):
        val = getattr(args, flag, None)
        if val is not None and val < 1:
            print(f"config error: --{flag} must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, DomainError, OSError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except DegenerateError as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return EXIT_DEGENERATE


if __name__ == "__main__":
    sys.exit(main())
