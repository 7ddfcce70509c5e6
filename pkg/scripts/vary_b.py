"""W1 of SW+EMS over a grid of half-widths b, next to the closed-form choice."""

import argparse

import numpy as np
from _common import run_and_save, show, write_rows

from numldp.experiment import ExperimentConfig
from numldp.wave import optimal_b


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[1.0, 2.0, 3.0, 4.0])
    ap.add_argument("--grid", type=float, nargs="+", default=list(np.round(np.arange(0.05, 0.46, 0.05), 2)))
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--repetitions", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/vary_b")
    args = ap.parse_args()

    for eps in args.eps:
        print(f"eps={eps:g}: closed-form b = {optimal_b(eps):.4f}")
        cfg = ExperimentConfig(
            dataset={"source": "beta", "a": 5, "b": 2, "n": args.n},
            methods=["sw-ems", *({"name": "sw-ems", "b": float(b)} for b in args.grid)],
            epsilons=[eps],
            repetitions=args.repetitions,
            seed=args.seed,
        )
        rows = run_and_save(cfg, f"{args.out}/eps{eps:g}")
        write_rows(f"{args.out}/plot.csv", rows, b_opt=round(optimal_b(eps), 6))
        show(rows)


if __name__ == "__main__":
    main()
