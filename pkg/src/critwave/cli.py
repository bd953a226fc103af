"""Command-line interface.

Subcommands mirror the module structure:

* ``constants`` - build (or verify) the spectral constants file
* ``static``    - run the static verification suite
* ``evolve``    - run a single evolution experiment from a config file
* ``quadrant``  - run the four-quadrant amplitude sweep

Exit codes: 0 all pass, 2 an Undetermined verdict is present, 3 a check
failed or the configuration is invalid.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

from .config import EvolutionConfig, Thresholds, load_config
from .evolve import UNDETERMINED
from .experiments import (ExperimentSpec, run_experiment, run_quadrant_sweep,
                          run_static_suite, save_report)
from .grids import RadialGrid
from .spectral import build_spectral_data

REFERENCE_RESOURCE = "spectral_reference_d3.json"


def load_reference_constants() -> dict | None:
    ref = resources.files("critwave").joinpath("data", REFERENCE_RESOURCE)
    if not ref.is_file():
        return None
    return json.loads(ref.read_text())


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value config file with sections")
    p.add_argument("--out", help="output file or directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=20240801)


def _load_sections(path):
    return load_config(path) if path else {}


def cmd_constants(args) -> int:
    sections = _load_sections(args.config)
    spectral = build_spectral_data(cross_check=True)
    payload = spectral.to_constants_dict()
    if args.verify:
        ref = load_reference_constants()
        if ref is None:
            print("no packaged reference constants found", file=sys.stderr)
            return 3
        drift = max(abs(payload[k] - ref[k]) for k in ("k", "a_W", "b_W"))
        print(f"k = {payload['k']:.12f}  drift vs reference = {drift:.3e}")
        if drift > 1e-10:
            print("FAIL constants differ from the stored reference", file=sys.stderr)
            return 3
        print("PASS constants regeneration is idempotent (<= 1e-10)")
    out = args.out or "spectral_constants.json"
    spectral.save_constants(out)
    print(f"wrote {out}")
    return 0


def cmd_static(args) -> int:
    sections = _load_sections(args.config)
    thresholds = sections.get("thresholds", Thresholds())
    grid = None
    if args.grid_n or args.spacing:
        grid = RadialGrid(3, 200.0, args.grid_n or 4096,
                          args.spacing or "sinh", 6.0)
    report = run_static_suite(thresholds=thresholds, grid=grid, seed=args.seed,
                              reference_constants=load_reference_constants())
    out = args.out or "static_report.json"
    save_report(report, out)
    for c in report["checks"]:
        tag = "PASS" if c["passed"] else "FAIL"
        print(f"{tag} {c['name']}: value = {c['value']:.6e} "
              f"(tolerance {c['tolerance']:g})")
        if not c["passed"] and c.get("detail"):
            print(f"     {c['detail']}")
    print(f"wrote {out}: {report['n_checks'] - report['n_failed']}"
          f"/{report['n_checks']} passed")
    return 0 if report["all_passed"] else 3


def cmd_evolve(args) -> int:
    if not args.config:
        print("evolve requires --config", file=sys.stderr)
        return 3
    sections = _load_sections(args.config)
    exp_sec = sections.get("experiment")
    if exp_sec is None:
        print("config must contain an [experiment] section", file=sys.stderr)
        return 3
    thresholds = sections.get("thresholds", Thresholds())
    evolution = sections.get("evolution", EvolutionConfig())
    params = dict(exp_sec)
    name = params.pop("name", "experiment")
    recipe = params.pop("recipe")
    parsed: dict = {}
    for key, raw in params.items():
        if key == "a":
            parsed["a"] = tuple(int(x) for x in raw.split(","))
        elif key in ("path", "representation"):
            parsed[key] = raw
        else:
            parsed[key] = float(raw)
    spec_exp = ExperimentSpec(name=name, recipe=recipe, params=parsed,
                              evolution=evolution, out_dir=args.out or ".",
                              seed=args.seed)
    spectral = build_spectral_data(cross_check=False)
    record = run_experiment(spec_exp, spectral, thresholds)
    print(f"{name}: backward = {record.verdict_backward}, "
          f"forward = {record.verdict_forward}")
    return 2 if UNDETERMINED in (record.verdict_forward,
                                 record.verdict_backward) else 0


def cmd_quadrant(args) -> int:
    sections = _load_sections(args.config)
    thresholds = sections.get("thresholds", Thresholds())
    evolution = sections.get("evolution")
    eps_list = tuple(float(x) for x in args.eps.split(","))
    table = run_quadrant_sweep(eps_list=eps_list, thresholds=thresholds,
                               evolution=evolution,
                               n_perturbed=args.perturbed,
                               seed=args.seed, threads=args.threads,
                               out_dir=args.out or "quadrant_out")
    for row in table.rows:
        mark = "ok" if row.matches_expected else "MISMATCH"
        print(f"a = ({row.a})  eps = {row.eps:g}  [{row.variant}]  "
              f"backward = {row.verdict_backward}  forward = {row.verdict_forward}  {mark}")
    if table.any_undetermined():
        return 2
    return 0 if all(r.matches_expected for r in table.rows) else 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="critwave",
        description="numerical laboratory for the energy-critical wave equation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="build / verify spectral constants")
    _add_common(p)
    p.add_argument("--verify", action="store_true",
                   help="compare against the packaged reference to 1e-10")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("static", help="run the static verification suite")
    _add_common(p)
    p.add_argument("--grid-n", type=int, help="override radial node count")
    p.add_argument("--spacing", choices=("sinh", "uniform"),
                   help="override the radial spacing rule")
    p.set_defaults(func=cmd_static)

    p = sub.add_parser("evolve", help="run one evolution experiment")
    _add_common(p)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("quadrant", help="run the four-quadrant sweep")
    _add_common(p)
    p.add_argument("--eps", default="1e-3,3e-3,1e-2",
                   help="comma-separated amplitude list")
    p.add_argument("--perturbed", type=int, default=0,
                   help="number of randomized perturbed variants")
    p.set_defaults(func=cmd_quadrant)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
