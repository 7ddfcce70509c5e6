"""Square, trapezoid and triangle waves at a common half-width, scored by W1."""

import argparse

from _common import run_and_save, show, write_rows

from numldp.experiment import ExperimentConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ratios", type=float, nargs="+", default=[0.2, 0.4, 0.6, 0.8],
                    help="top-to-base width ratios of the trapezoids")
    ap.add_argument("--estimator", choices=["sw-ems", "sw-em"], default="sw-ems")
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--eps", type=float, nargs="+", default=[1.0])
    ap.add_argument("--repetitions", type=int, default=20)
    ap.add_argument("--unpaired", action="store_true", help="independent streams per shape")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/wave_shapes")
    args = ap.parse_args()

    est = args.estimator
    methods = [est]
    methods += [{"name": est, "shape": "trapezoid", "ratio": r} for r in args.ratios]
    methods.append({"name": est, "shape": "triangle"})
    cfg = ExperimentConfig(
        dataset={"source": "beta", "a": 5, "b": 2, "n": args.n},
        methods=methods,
        epsilons=args.eps,
        repetitions=args.repetitions,
        seed=args.seed,
        paired=not args.unpaired,
    )
    rows = run_and_save(cfg, args.out)
    write_rows(f"{args.out}/plot.csv", rows)
    show(rows)


if __name__ == "__main__":
    main()
