"""Wasserstein and KS distance of every distribution estimator across an epsilon grid.

Example:
    python3 scripts/distances.py --repetitions 5 --out results/distances
    python3 scripts/distances.py --csv data/income.csv --preset income --out results/income
"""

import argparse

from _common import run_and_save, show, write_rows

from numldp.experiment import ExperimentConfig

METHODS = ["sw-ems", "sw-em", "cfo-binning-16", "cfo-binning-32", "cfo-binning-64", "hh-admm"]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--csv", help="real dataset (one value per line); default is Beta(5,2)")
    ap.add_argument("--preset", default="unit", help="filter and scaling rule for --csv")
    ap.add_argument("--n", type=int, default=100_000, help="synthetic sample size, or the cap for --csv")
    ap.add_argument("--eps", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    ap.add_argument("--repetitions", type=int, default=20)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/distances")
    args = ap.parse_args()

    if args.csv:
        dataset = {"source": "csv", "path": args.csv, "preset": args.preset, "max_n": args.n}
    else:
        dataset = {"source": "beta", "a": 5, "b": 2, "n": args.n}
    cfg = ExperimentConfig(
        dataset=dataset,
        methods=METHODS,
        epsilons=args.eps,
        repetitions=args.repetitions,
        metrics=["w1", "ks"],
        seed=args.seed,
        threads=args.threads,
    )
    rows = run_and_save(cfg, args.out)
    write_rows(f"{args.out}/plot.csv", rows)
    show(rows)


if __name__ == "__main__":
    main()
