"""Command-line driver for running cells, summarizing, and exporting series."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

from .autodiff import DomainError
from .harness import (RunReport, format_summary, load_report, run_cell,
                      emit_error_series, summarize, write_summary_csv)
from .problems import REGISTRY, get_problem
from .training import TrainConfig


def parse_seeds(text: str) -> list[int]:
    """Seed lists: "3", "0,2,4", or the inclusive range form "0..4"."""
    seeds: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if ".." in part:
                lo_text, hi_text = part.split("..", 1)
                lo, hi = int(lo_text), int(hi_text)
                if hi < lo:
                    raise ValueError
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed spec {text!r}") from None
    if not seeds:
        raise argparse.ArgumentTypeError("no seeds given")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipinn",
        description="Train invariant and vanilla physics-informed ODE solvers "
                    "and report their errors.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="train experiment cells, persist artifacts")
    run_p.add_argument("--problem", default="all",
                       help="problem name or 'all' (default: all)")
    run_p.add_argument("--formulation", default="both",
                       choices=["invariant", "vanilla", "both"])
    run_p.add_argument("--seeds", type=parse_seeds, default="0..4",
                       help="e.g. '0..4' or '0,2,7' (default: 0..4)")
    run_p.add_argument("--epochs", type=int, default=3000)
    run_p.add_argument("--collocation", type=int, default=200,
                       help="number of collocation points")
    run_p.add_argument("--alpha", type=float, default=None,
                       help="initial-condition loss weight; defaults to each "
                            "problem's benchmark value")
    run_p.add_argument("--lr", type=float, default=1e-3, help="Adam step size")
    run_p.add_argument("--mean-reduction", action="store_true",
                       help="average the equation loss over points instead of summing")
    run_p.add_argument("--jobs", type=int, default=1,
                       help="cells to train in parallel")
    run_p.add_argument("--out", required=True, help="output directory")

    sum_p = sub.add_parser("summarize", help="aggregate persisted run reports")
    sum_p.add_argument("--in", dest="in_dir", required=True,
                       help="directory holding cell subdirectories")
    sum_p.add_argument("--csv", default=None, help="also write the table as CSV")

    ser_p = sub.add_parser("series", help="export one report's error series as CSV")
    ser_p.add_argument("--report", required=True, help="path to a report.json")
    ser_p.add_argument("--csv", required=True, help="output CSV path")
    return parser


def _cell_line(report: RunReport) -> str:
    return (f"{report.problem:<12} {report.formulation:<9} "
            f"seed={report.seed} status={report.status:<11} "
            f"mse={report.mse:.4e} summary={report.mse_summary:.4e} "
            f"[{report.wall_time:.1f}s]")


def _cmd_run(args) -> int:
    problems = list(REGISTRY) if args.problem == "all" else [args.problem]
    for name in problems:
        get_problem(name)
    formulations = (["invariant", "vanilla"] if args.formulation == "both"
                    else [args.formulation])
    cells = [
        (name, form,
         TrainConfig(epochs=args.epochs, learning_rate=args.lr,
                     alpha_ic=(get_problem(name).alpha_ic
                               if args.alpha is None else args.alpha),
                     n_collocation=args.collocation,
                     seed=seed, formulation=form,
                     mean_reduction=args.mean_reduction))
        for name in problems
        for form in formulations
        for seed in args.seeds
    ]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(run_cell, name, form, cfg, out)
                       for name, form, cfg in cells]
            for future in as_completed(futures):
                print(_cell_line(future.result()), flush=True)
    else:
        for name, form, cfg in cells:
            print(_cell_line(run_cell(name, form, cfg, out)), flush=True)
    print(f"wrote {len(cells)} cells under {out}")
    return 0


def _cmd_summarize(args) -> int:
    table = summarize(args.in_dir)
    print(format_summary(table))
    if args.csv is not None:
        write_summary_csv(table, args.csv)
        print(f"wrote {args.csv}")
    return 0


def _cmd_series(args) -> int:
    report = load_report(args.report)
    emit_error_series(report, args.csv)
    print(f"wrote {args.csv}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "summarize": _cmd_summarize,
                "series": _cmd_series}
    try:
        return handlers[args.command](args)
    except (ValueError, DomainError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
