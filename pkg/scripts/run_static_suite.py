#!/usr/bin/env python3
"""Run the static verification suite and write the JSON report."""

import argparse
import json
import sys

from critwave.cli import load_reference_constants
from critwave.experiments import run_static_suite, save_report
from critwave.grids import RadialGrid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="static_report.json")
    ap.add_argument("--grid-n", type=int, default=4096)
    ap.add_argument("--spacing", default="sinh", choices=("sinh", "uniform"))
    ap.add_argument("--seed", type=int, default=20240801)
    args = ap.parse_args()
    grid = RadialGrid(3, 200.0, args.grid_n, args.spacing, 6.0)
    report = run_static_suite(grid=grid, seed=args.seed,
                              reference_constants=load_reference_constants())
    save_report(report, args.out)
    for c in report["checks"]:
        tag = "PASS" if c["passed"] else "FAIL"
        print(f"{tag} {c['name']}: {c['value']:.6e} (tol {c['tolerance']:g})")
    print(f"{report['n_checks'] - report['n_failed']}/{report['n_checks']} "
          f"checks passed -> {args.out}")
    sys.exit(0 if report["all_passed"] else 3)


if __name__ == "__main__":
    main()
