"""Command line interface: ``igarom <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import database, pipeline, plotting, rom


def _pair(text: str, cast=float, sep=","):
    parts = text.lower().split(sep)
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two values separated by {sep!r}, got {text!r}")
    try:
        return tuple(cast(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _grid(text: str):
    return _pair(text, int, "x")


def _dofs(text: str):
    """``400`` (a square net) or ``20x20``."""
    if "x" in text.lower():
        return _grid(text)
    n = int(text)
    side = math.isqrt(n)
    if side * side != n:
        raise argparse.ArgumentTypeError(f"{n} is not a square; pass the net as e.g. 20x20")
    return side, side


def _figure_path(csv_path, explicit):
    return Path(explicit) if explicit else Path(csv_path).with_suffix(".png")


def cmd_offline(args):
    config = pipeline.PipelineConfig.from_file(args.config) if args.config else pipeline.PipelineConfig()
    changes = {}
    if args.grid:
        changes["grid"] = args.grid
    if args.dofs:
        changes["dofs"] = args.dofs
    if args.jobs:
        changes["jobs"] = args.jobs
    if changes:
        config = config.replace(**changes)
    db = pipeline.offline(config, args.out)
    print(f"wrote {db.n_train} snapshots x {db.n_dofs} dofs to {args.out}")


def cmd_online(args):
    db = database.load(args.db)
    reduced, surface, grid = pipeline.online(
        db, args.mu, args.modes, args.vtk, args.csv, resolution=args.resolution
    )
    print(f"mu = {reduced.mu}  modes = {reduced.n_modes}  max temperature = {grid.values.max():.6g}"
          f"  predict time = {reduced.predict_time:.3e} s")
    if args.plot:
        plotting.plot_field(grid, args.plot, title="reduced solution, mu = ({:.3g}, {:.3g})".format(*reduced.mu))
    if args.compare:
        full = pipeline.solve_full_order(pipeline.db_config(db), args.mu)
        err, emax = rom.pointwise_error(full, reduced, surface, args.resolution)
        rel = rom.relative_l2_error(full, reduced)
        print(f"max pointwise error = {emax:.6e}  relative L2 error = {rel:.6e}")
        if args.plot:
            plotting.plot_field(err, Path(args.plot).with_name(Path(args.plot).stem + "_error.png"),
                                title="pointwise error", label="|error|")


def cmd_error_study(args):
    db = database.load(args.db)
    report = pipeline.error_study(db, args.test_samples, args.seed, args.max_modes)
    report.write_error_csv(args.csv)
    if not args.no_plot:
        plotting.plot_error_study(report, _figure_path(args.csv, args.plot))
    for m, e in report.errors_by_modes:
        print(f"modes {m:3d}  mean relative error {e:.3e}")
    n, m, e = report.errors_by_size[-1]
    print(f"full database ({n} snapshots, {m} modes): {e:.3e}")


def cmd_singular_values(args):
    db = database.load(args.db)
    summary = pipeline.singular_value_report(db, args.csv)
    if not args.no_plot:
        plotting.plot_singular_values(summary["singular_values"], _figure_path(args.csv, args.plot))
    norm = summary["normalized"]
    print(f"rank = {summary['rank']}  first-mode energy = {summary['first_mode_energy']:.4f}")
    for k in range(min(10, norm.size)):
        print(f"sigma_{k + 1}/sigma_1 = {norm[k]:.6e}")


def cmd_speedup(args):
    db = database.load(args.db)
    report = pipeline.speedup(db, args.mu, args.repeats, args.modes)
    print(json.dumps({"speedup": report.speedup, **report.timings}, indent=2))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="igarom", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("offline", help="run the snapshot campaign and write a database")
    p.add_argument("--config", help="JSON file with PipelineConfig fields")
    p.add_argument("--out", required=True, help="database directory")
    p.add_argument("--grid", type=_grid, help="parameter grid, e.g. 10x10")
    p.add_argument("--dofs", type=_dofs, help="basis size, e.g. 400 or 20x20")
    p.add_argument("--jobs", type=int, help="worker processes for the snapshot solves")
    p.set_defaults(func=cmd_offline)

    p = sub.add_parser("online", help="predict the field at a new parameter")
    p.add_argument("--db", required=True)
    p.add_argument("--mu", required=True, type=_pair, help="e.g. 0,0")
    p.add_argument("--modes", type=int)
    p.add_argument("--vtk")
    p.add_argument("--csv")
    p.add_argument("--plot", help="PNG of the predicted field")
    p.add_argument("--resolution", type=int, default=41)
    p.add_argument("--compare", action="store_true", help="also solve the full-order problem and report errors")
    p.set_defaults(func=cmd_online)

    p = sub.add_parser("error-study", help="a-posteriori error against fresh truth solves")
    p.add_argument("--db", required=True)
    p.add_argument("--test-samples", type=int, default=20)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--max-modes", type=int, default=20)
    p.add_argument("--csv", required=True)
    p.add_argument("--plot", help="figure path (default: CSV path with .png)")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_error_study)

    p = sub.add_parser("singular-values", help="normalized spectrum and energy profile")
    p.add_argument("--db", required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--plot", help="figure path (default: CSV path with .png)")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_singular_values)

    p = sub.add_parser("speedup", help="full-order solve time over ROM prediction time")
    p.add_argument("--db", required=True)
    p.add_argument("--mu", required=True, type=_pair)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--modes", type=int)
    p.set_defaults(func=cmd_speedup)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    np.set_printoptions(precision=6)
    try:
        args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"igarom {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
