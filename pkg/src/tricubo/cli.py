"""Command line interface: ``tricubo <command> ...``.

Exit codes: 0 success, 1 pipeline or check failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from . import bench
from .components import (
    Connectivity,
    bfs_oracle_2d,
    bfs_oracle_3d,
    is_refinement,
    label_2d,
    label_3d,
    save_components,
)
from .cubulation import (
    CubulationError,
    compute_cubulation,
    load_cubulation,
    save_cubulation,
    verify_cubulation,
)
from .fields import (
    DEFAULT_DENSE_CAP,
    Field2D,
    FieldError,
    MultiLevelField,
    load_field,
    random_mask,
    threshold_field,
    to_cubic,
)
from .grid import GridError, generate_hex_patch, load_grid, nearest_cell, save_grid, validate_grid

PIPELINE_ERRORS = (GridError, CubulationError, FieldError, ValueError, IndexError, KeyError, OSError)


def _lonlat(text: str) -> tuple[float, float]:
    try:
        lon, lat = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LON,LAT, got {text!r}") from None
    return lon, lat


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [v for v in text.split(",") if v]


def _grid(args):
    return load_grid(args.grid, index_base=args.index_base, sentinel=args.sentinel)


# ----------------------------------------------------------------------------
# commands


def cmd_gen(args) -> int:
    grid = generate_hex_patch(args.radius, seed=args.seed)
    save_grid(grid, args.out)
    print(f"cells={grid.n_cells} edges={grid.n_edges} vertices={grid.n_vertices}")
    return 0


def cmd_validate(args) -> int:
    report = validate_grid(_grid(args))
    print(report)
    return 0 if report.ok else 1


def cmd_cubulate(args) -> int:
    grid = _grid(args)
    if args.nearest is not None:
        start = nearest_cell(grid, *args.nearest)
    else:
        start = 0 if args.start is None else args.start
    progress = (lambda i, n: print(f"round={i} new={n}")) if args.progress else None
    cub = compute_cubulation(grid, start, radius=args.radius, progress=progress)
    report = verify_cubulation(grid, cub)
    if not report.ok:
        print(report, file=sys.stderr)
        return 1
    save_cubulation(cub, args.out)
    print(f"start={cub.start_cell} radius={cub.radius} shift={cub.shift} "
          f"covered={cub.n_reached}/{grid.n_cells}")
    return 0


def cmd_label2d(args) -> int:
    grid = _grid(args)
    cub = load_cubulation(args.cubulation, grid)
    field = load_field(args.field, grid)
    if not isinstance(field, Field2D):
        raise FieldError("label2d needs a single-level 'cell,value' field; use label3d")
    cubic = to_cubic(threshold_field(field, args.threshold), cub)
    comps = label_2d(cubic, args.connectivity, engine=args.engine, dense_cap=args.dense_cap)
    save_components(comps, args.out, args.connectivity)
    print(f"components={len(comps)} active={comps.n_active}")
    return 0


def cmd_label3d(args) -> int:
    grid = _grid(args)
    cub = load_cubulation(args.cubulation, grid)
    field = load_field(args.field, grid, nlev=args.nlev)
    if not isinstance(field, MultiLevelField):
        raise FieldError("label3d needs a multi-level 'level,cell,value' field")
    comps = label_3d(threshold_field(field, args.threshold), cub, args.connectivity, engine=args.engine)
    save_components(comps, args.out, args.connectivity)
    print(f"components={len(comps)} active={comps.n_active}")
    return 0


def _mask_text(mask) -> str:
    return " ".join(str(c) for c in np.flatnonzero(mask).tolist())


def cmd_check(args) -> int:
    grid = _grid(args)
    report = validate_grid(grid)
    if not report.ok:
        print(f"FAIL grid validation\n{report}")
        return 1
    if args.cubulation:
        cub = load_cubulation(args.cubulation, grid, verify=False)
    else:
        cub = compute_cubulation(grid, args.start)
    failures = 0
    report = verify_cubulation(grid, cub)
    print(f"{'PASS' if report.ok else 'FAIL'} verify_cubulation")
    if not report.ok:
        print(report)
        failures += 1

    rng = np.random.default_rng(args.seed)
    conns = (Connectivity.VERTEX, Connectivity.EDGE)
    for trial in range(args.trials):
        mask = random_mask(grid.n_cells, args.p, rng)
        problems = []
        try:
            cubic = to_cubic(mask, cub)
            got = {}
            for conn in conns:
                got[conn] = label_2d(cubic, conn)
                if not got[conn].same_partition(bfs_oracle_2d(grid, mask, conn)):
                    problems.append(f"oracle-2d {conn.value}")
                try:
                    dense = label_2d(cubic, conn, engine="dense", dense_cap=args.dense_cap)
                except FieldError:
                    dense = None
                if dense is not None and not dense.same_partition(got[conn]):
                    problems.append(f"engine-parity {conn.value}")
            if not is_refinement(got[Connectivity.EDGE], got[Connectivity.VERTEX]):
                problems.append("refinement")
        except (FieldError, CubulationError) as exc:
            problems.append(str(exc))
        if problems:
            failures += 1
            print(f"FAIL trial={trial} {'; '.join(problems)}")
            print(f"  counterexample active cells: {_mask_text(mask.mask)}")

    trials_3d = max(1, args.trials // 10) if args.trials else 0
    for trial in range(trials_3d):
        levels = random_mask(grid.n_cells, args.p, rng, nlev=args.levels)
        problems = []
        try:
            for conn in conns:
                if not label_3d(levels, cub, conn).same_partition(bfs_oracle_3d(grid, levels, conn)):
                    problems.append(f"oracle-3d {conn.value}")
        except (FieldError, CubulationError) as exc:
            problems.append(str(exc))
        if problems:
            failures += 1
            print(f"FAIL trial-3d={trial} {'; '.join(problems)}")
            for k in range(levels.nlev):
                print(f"  level {k} active cells: {_mask_text(levels.mask[k])}")

    total = 1 + args.trials + trials_3d
    print(f"{'PASS' if not failures else 'FAIL'} check: {total - failures}/{total} passed")
    return 0 if not failures else 1


def cmd_bench(args) -> int:
    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    report = bench.run_bench(args.sizes, steps=args.steps, reps=args.reps, seed=args.seed, log=log)
    if args.out == "-":
        report.write_csv(sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            report.write_csv(fh)
    return 0


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tricubo",
        description="Connected components on triangular grids via cubulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    grid_opts = argparse.ArgumentParser(add_help=False)
    grid_opts.add_argument("--grid", required=True, help="Grid JSON file")
    grid_opts.add_argument("--index-base", type=int, choices=(0, 1), default=0,
                           help="base of the ids in the grid file (ICON: 1)")
    grid_opts.add_argument("--sentinel", type=int, default=-1,
                           help="missing-neighbor marker in the grid file (ICON: -9999)")

    label_opts = argparse.ArgumentParser(add_help=False)
    label_opts.add_argument("--cubulation", required=True)
    label_opts.add_argument("--field", required=True)
    label_opts.add_argument("--threshold", type=float, required=True)
    label_opts.add_argument("--connectivity", type=Connectivity, choices=list(Connectivity),
                            default=Connectivity.VERTEX, metavar="{vertex,edge}")
    label_opts.add_argument("--engine", choices=("sparse", "dense"), default="sparse")
    label_opts.add_argument("--dense-cap", type=int, default=DEFAULT_DENSE_CAP)
    label_opts.add_argument("--out", required=True)

    p = sub.add_parser("gen", help="write a synthetic hexagonal patch")
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--seed", type=int, default=None, help="permute cell/edge/vertex ids")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("validate", parents=[grid_opts], help="check grid topology")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("cubulate", parents=[grid_opts], help="compute and cache the cubulation")
    where = p.add_mutually_exclusive_group()
    # default None: argparse only sees a conflict when the value differs from the default
    where.add_argument("--start", type=int, default=None, help="start cell id (default 0)")
    where.add_argument("--nearest", type=_lonlat, metavar="LON,LAT")
    how = p.add_mutually_exclusive_group()
    how.add_argument("--radius", type=int, default=None)
    how.add_argument("--auto", action="store_true", help="grow until no new cell (default)")
    p.add_argument("--progress", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cubulate)

    p = sub.add_parser("label2d", parents=[grid_opts, label_opts], help="label a single-level field")
    p.set_defaults(func=cmd_label2d)

    p = sub.add_parser("label3d", parents=[grid_opts, label_opts], help="label a multi-level field")
    p.add_argument("--nlev", type=int, default=None)
    p.set_defaults(func=cmd_label3d)

    p = sub.add_parser("check", parents=[grid_opts], help="run the invariant suite")
    p.add_argument("--cubulation", default=None, help="cache to check instead of computing one")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p", type=float, default=0.3, help="activation probability of random masks")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--dense-cap", type=int, default=DEFAULT_DENSE_CAP)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("bench", help="time pipeline steps, write CSV")
    p.add_argument("--sizes", type=_int_list, required=True, help="patch radii, e.g. 50,100,200")
    p.add_argument("--steps", type=_str_list, default=list(bench.STEPS),
                   help=f"comma-separated subset of {','.join(bench.STEPS)}")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PIPELINE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
