"""Range queries, mean, variance and quantiles on Beta(5,2).

Hierarchy methods are only scored on range queries, SR and PM only on the
two moments; the rest are scored on everything.
"""

import argparse

from _common import run_and_save, show, write_rows

from numldp.experiment import ExperimentConfig

FULL = ["range:0.1", "range:0.4", "mean", "var", "quantiles"]


def method_list():
    out = [{"name": m, "metrics": FULL} for m in ("sw-ems", "sw-em", "hh-admm")]
    out.append({"name": "cfo-binning", "bins": 32, "metrics": FULL})
    out += [{"name": m, "metrics": ["range:0.1", "range:0.4"]} for m in ("hh", "haar")]
    out += [{"name": m, "metrics": ["mean", "var"]} for m in ("sr", "pm")]
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    ap.add_argument("--repetitions", type=int, default=20)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/range_stats")
    args = ap.parse_args()

    cfg = ExperimentConfig(
        dataset={"source": "beta", "a": 5, "b": 2, "n": args.n},
        methods=method_list(),
        epsilons=args.eps,
        repetitions=args.repetitions,
        seed=args.seed,
        threads=args.threads,
    )
    rows = run_and_save(cfg, args.out)
    write_rows(f"{args.out}/plot.csv", rows)
    show(rows)


if __name__ == "__main__":
    main()
