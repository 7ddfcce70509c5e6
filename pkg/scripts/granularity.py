"""Effect of the bucket count d on SW+EMS and its competitors (W1)."""

import argparse

from _common import run_and_save, show, write_rows

from numldp.experiment import ExperimentConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--buckets", type=int, nargs="+", default=[256, 512, 1024, 2048])
    ap.add_argument("--methods", nargs="+", default=["sw-ems", "cfo-binning-32", "hh-admm"])
    ap.add_argument("--eps", type=float, nargs="+", default=[1.0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--repetitions", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/granularity")
    args = ap.parse_args()

    for d in args.buckets:
        cfg = ExperimentConfig(
            dataset={"source": "beta", "a": 5, "b": 2, "n": args.n, "buckets": d},
            methods=args.methods,
            epsilons=args.eps,
            repetitions=args.repetitions,
            seed=args.seed,
        )
        print(f"d = {d}")
        rows = run_and_save(cfg, f"{args.out}/d{d}")
        write_rows(f"{args.out}/plot.csv", rows, buckets=d)
        show(rows)


if __name__ == "__main__":
    main()
