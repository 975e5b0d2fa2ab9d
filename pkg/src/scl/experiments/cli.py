"""Command-line entry point.

    scl <kernels|gw|barriers|cover|clock|plane|wasserstein>
        [--config path.json] [--seed N] [--trials N] [--out DIR] [--fast-mode]

Runs one experiment, writes <experiment>.csv and summary.json into --out and
exits nonzero iff any required row failed.  SCL_THREADS overrides the worker
count for trial-parallel experiments.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from . import config as cfg_mod
from .report import emit_report
from .runners import RUNNERS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="scl", description="Sphere cover-time lab experiments"
    )
    p.add_argument("experiment", choices=sorted(RUNNERS))
    p.add_argument("--config", help="JSON config; unknown keys are rejected")
    p.add_argument("--seed", type=int, help="64-bit master seed")
    p.add_argument("--trials", type=int, help="trial count (experiment-specific)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument(
        "--fast-mode", action="store_true",
        help="shrink Monte Carlo sizes for a quick smoke run",
    )
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = cfg_mod.load_config(args.experiment, args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.fast_mode:
        cfg = dataclasses.replace(cfg, fast_mode=True)
    if args.trials is not None and args.trials > 0:
        cfg = dataclasses.replace(cfg, trials=args.trials)
    runner, _ = RUNNERS[args.experiment]
    trials = args.trials if args.trials else (cfg.trials or None)
    report = runner(cfg, trials=trials)
    csv_path, json_path = emit_report(report, args.out)
    for row in report.rows:
        status = "PASS" if row.passed else ("FAIL" if row.required else "warn")
        print(f"[{status}] {row.row_id}: {row.quantity} = {row.value:.6g}", file=sys.stderr)
    print(f"wrote {csv_path} and {json_path}", file=sys.stderr)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
