"""Helpers shared by the experiment scripts in this folder."""

from __future__ import annotations

import csv
import sys
from dataclasses import asdict
from pathlib import Path

from numldp.experiment import ExperimentConfig, run_experiment, summarize, summary_table, write_outputs


def run_and_save(cfg: ExperimentConfig, out_dir, verbose: bool = True) -> list:
    """Run ``cfg``, write the record files under ``out_dir`` and return the summary rows."""
    done = [0]
    total = len(cfg.methods) * len(cfg.epsilons) * cfg.repetitions

    def tick(cell, _records):
        done[0] += 1
        if verbose:
            print(f"\r{done[0]}/{total} cells", end="", file=sys.stderr, flush=True)

    records = run_experiment(cfg, progress=tick)
    if verbose:
        print(file=sys.stderr)
    write_outputs(records, cfg, out_dir)
    return summarize(records)


def write_rows(path, rows, **extra) -> None:
    """Long-format CSV of summary rows; ``extra`` adds constant columns such as the bucket count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    new = not path.exists()
    with path.open("a", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow([*extra, "method", "dataset", "epsilon", "metric", "mean", "std", "count"])
        for r in rows:
            w.writerow([*extra.values(), *asdict(r).values()])


def show(rows) -> None:
    print(summary_table(rows))
