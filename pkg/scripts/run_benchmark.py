#!/usr/bin/env python3
"""Train the full benchmark matrix and print the error-comparison table.

Both formulations of every registered problem, five seeds each, at the full
training budget: roughly 1.5 hours of CPU time at the defaults.  Artifacts
land under --out; scale the sweep down with --epochs or --seeds.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from ipinn.cli import parse_seeds
from ipinn.harness import format_summary, run_cell, summarize, write_summary_csv
from ipinn.problems import REGISTRY, get_problem
from ipinn.training import TrainConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="train every (problem, formulation, seed) benchmark cell")
    parser.add_argument("--out", default="runs/benchmark",
                        help="artifact directory (default: %(default)s)")
    parser.add_argument("--seeds", type=parse_seeds, default=[0, 1, 2, 3, 4],
                        help="seed list, e.g. 0..4 or 0,2,5 (default: 0..4)")
    parser.add_argument("--epochs", type=int, default=3000,
                        help="training epochs per cell (default: %(default)s)")
    args = parser.parse_args(argv)

    out = Path(args.out)
    for problem in REGISTRY:
        alpha = get_problem(problem).alpha_ic
        for formulation in ("invariant", "vanilla"):
            for seed in args.seeds:
                config = TrainConfig(epochs=args.epochs, seed=seed,
                                     alpha_ic=alpha)
                start = time.perf_counter()
                report = run_cell(problem, formulation, config, out_dir=out)
                print(f"{problem:<12} {formulation:<10} seed {seed}  "
                      f"mse {report.mse:.3e}  summary {report.mse_summary:.3e}  "
                      f"{report.status:<11} {time.perf_counter() - start:5.1f}s",
                      flush=True)

    table = summarize(out)
    write_summary_csv(table, out / "summary.csv")
    print()
    print(format_summary(table))
    print(f"\nsummary table written to {out / 'summary.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
