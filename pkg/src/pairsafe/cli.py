"""Command-line interface.

Machine-readable ``key=value`` lines (or CSV) go to standard output; aligned
tables and diagnostics go to standard error.  Exit codes: 0 ok, 2 usage or
bad input, 3 numerical certification failure, 4 I/O.
"""

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import hj_solver
from .coordination import compute_conflict_radius
from .dynamics import DynamicsKind
from .errors import (
    BRTTouchesBoundary,
    CorruptPayload,
    EmptyTrace,
    FormatVersionMismatch,
    NonConvergence,
    NonConvergenceWarning,
    PairSafeError,
    ParseError,
    SchemaMismatch,
)
from .fieldio import load_field, save_field
from .grid import Axis, FieldKind, GridSpec, default_grid, interpolate
from .units import UNITS, parse_quantity

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _dynamics(text):
    try:
        kind = DynamicsKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if kind is DynamicsKind.SINGLE_INTEGRATOR:
        raise argparse.ArgumentTypeError("choose double-integrator or air-taxi")
    return kind


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _kv(pairs):
    for k, v in pairs:
        if isinstance(v, float):
            v = repr(v)
        print(f"{k}={v}")


# ---------------------------------------------------------------------------
# solve


def _grid_for(args, kind):
    base = hj_solver.default_ttr_grid() if args.game == "ttr" else default_grid(kind)
    n = args.grid_n or base.shape
    lo = args.grid_lo or tuple(base.lo)
    hi = args.grid_hi or tuple(base.hi)
    if not len(n) == len(lo) == len(hi) == base.ndim:
        raise ParseError(f"grid overrides need {base.ndim} values per option")
    axes = tuple(Axis(int(k), float(a), float(b), ax.periodic) for k, a, b, ax in zip(n, lo, hi, base.axes))
    return GridSpec(axes)


def cmd_solve(args):
    kind = args.dynamics
    grid = _grid_for(args, kind)
    horizon = args.horizon
    if args.game == "worst" and horizon is None and not args.infinite:
        horizon = hj_solver.DEFAULT_WORST_HORIZON[kind]
    settings = hj_solver.SolveSettings(cfl=args.cfl, convergence_tol=args.tol, max_iters=args.max_iters, horizon=horizon,
                                       scheme=args.scheme)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonConvergenceWarning)
        if args.game == "coop":
            field = hj_solver.solve_cooperative_value(kind, grid, settings)
        elif args.game == "worst":
            field = hj_solver.solve_worstcase_value(kind, grid, settings)
        else:
            if kind is not DynamicsKind.AIR_TAXI:
                raise ParseError("time-to-reach is defined for the air taxi only")
            field = hj_solver.solve_time_to_reach(grid=grid, settings=settings)
    save_field(field, args.out)
    md = field.metadata
    _kv([
        ("path", args.out),
        ("game", args.game),
        ("dynamics", kind.name.lower()),
        ("converged", int(field.converged)),
        ("residual", float(md["residual"])),
        ("iterations", md["iterations"]),
        ("horizon", float(md["horizon"])),
        ("wall_time", float(md["wall_time"])),
    ])
    if not field.converged:
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        print("error: solve did not converge; partial field written and flagged", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# ---------------------------------------------------------------------------
# radius


def cmd_radius(args):
    field = load_field(args.field)
    if field.kind is not FieldKind.WORST_CASE:
        print(f"error: {args.field} holds a {field.kind.name.lower()} field, need worst_case", file=sys.stderr)
        return EXIT_USAGE
    try:
        value, dim = parse_quantity(args.r_safety)
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    if dim not in (None, "length"):
        raise ParseError(f"r_safety must be a length, got a {dim}")
    unit = args.r_safety.strip().lstrip("0123456789.+-eE ").strip() or "m"
    factor = UNITS[unit][0]
    try:
        res = compute_conflict_radius(field, value)
    except BRTTouchesBoundary as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: re-solve with larger --grid-lo/--grid-hi position extents", file=sys.stderr)
        return EXIT_NUMERIC
    pairs = [("r_safety_m", float(value)), ("r_conflict_m", float(res.radius))]
    if unit != "m":
        pairs.append((f"r_conflict_{unit.replace('/', '_')}", float(res.radius / factor)))
    pairs += [("node_radius_m", float(res.node_radius)), ("tolerance_m", float(res.tolerance))]
    _kv(pairs)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args):
    from .runner import format_table, run_batch

    manifest = run_batch(args.config, seeds=args.seeds, episodes=args.episodes, out_dir=args.out, jobs=args.jobs, filter_mode=args.filter)
    print(format_table(manifest), file=sys.stderr)
    agg = manifest["aggregate"]
    pairs = [("manifest", str(Path(args.out) / "manifest.json")), ("episodes", len(manifest["episode_rows"]))]
    for k in sorted(agg):
        pairs.append((f"{k}_mean", agg[k]["mean"]))
        pairs.append((f"{k}_std", agg[k]["std"]))
    _kv(pairs)
    return EXIT_OK


# ---------------------------------------------------------------------------
# metrics


def cmd_metrics(args):
    from .config import parse_config
    from .metrics import compute_metrics, metrics_for_config
    from .simulator import read_trace_csv

    cfg = None
    if args.config:
        from .runner import radius_resolver

        cfg = parse_config(args.config, radius_resolver=radius_resolver if args.r_conflict is None else None)
        if args.r_conflict is not None:
            cfg.r_conflict = args.r_conflict
    elif args.r_safety is None or args.r_conflict is None:
        raise ParseError("pass --config, or both --r-safety and --r-conflict")
    for idx, path in enumerate(args.traces):
        trace = read_trace_csv(path)
        if cfg is not None:
            m = metrics_for_config(trace, cfg)
        else:
            m = compute_metrics(trace, args.r_safety, args.r_conflict, horizon=args.horizon, n_waypoints=args.waypoints)
        prefix = "" if len(args.traces) == 1 else f"trace{idx}."
        _kv([(prefix + k, v) for k, v in m.as_dict().items()])
        if args.series:
            out = Path(args.series)
            if len(args.traces) > 1:
                out = out.with_name(f"{out.stem}_{idx}{out.suffix}")
            _write_series(trace, out)
    return EXIT_OK


def _write_series(trace, path):
    """Per-tick minimum pairwise distance as ``t,min_dist`` CSV."""
    lines = ["t,min_dist"]
    for t, rows in sorted(trace.by_time().items()):
        if len(rows) < 2:
            d = float("inf")
        else:
            p = np.array([r.state[:2] for r in rows])
            dd = np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])
            np.fill_diagonal(dd, np.inf)
            d = float(dd.min())
        lines.append(f"{t:.9g},{d:.9g}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# dump-slice


def cmd_dump_slice(args):
    field = load_field(args.field)
    spec = field.spec
    a, b = args.axes
    if not (0 <= a < spec.ndim and 0 <= b < spec.ndim and a != b):
        raise ParseError(f"--axes needs two distinct indices in [0, {spec.ndim})")
    fixed = np.array([0.5 * (ax.lo + ax.hi) if not ax.periodic else 0.0 for ax in spec.axes])
    for item in args.fix or ():
        k, _, v = item.partition("=")
        try:
            k = int(k)
            fixed[k] = float(v)
        except (ValueError, IndexError):
            raise ParseError(f"--fix expects axis=value, got {item!r}") from None
    xa, xb = spec.axes[a].nodes, spec.axes[b].nodes
    q = np.repeat(fixed[None, :], xa.size * xb.size, axis=0)
    q[:, a] = np.repeat(xa, xb.size)
    q[:, b] = np.tile(xb, xa.size)
    vals = interpolate(field, q, clamp=True)
    lines = [f"axis{a},axis{b},value"]
    lines += [f"{x:.9g},{y:.9g},{v:.9g}" for (x, y), v in zip(q[:, [a, b]], vals)]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        _kv([("path", args.out), ("rows", len(lines) - 1)])
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="pairsafe", description="Pairwise reachability fields, safety filters and multi-agent episodes.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve a value field and write it to a file")
    s.add_argument("--dynamics", type=_dynamics, required=True, help="double-integrator or air-taxi")
    s.add_argument("--game", choices=("coop", "worst", "ttr"), required=True)
    s.add_argument("--grid-n", type=_ints, help="points per axis, comma separated")
    s.add_argument("--grid-lo", type=_floats, help="lower bounds per axis; write --grid-lo=-6000,... for negative values")
    s.add_argument("--grid-hi", type=_floats, help="upper bounds per axis")
    s.add_argument("--horizon", type=float, help="finite look-back horizon in seconds")
    s.add_argument("--infinite", action="store_true", help="march the worst-case game to convergence")
    s.add_argument("--cfl", type=float, default=0.5)
    s.add_argument("--tol", type=float, help="convergence tolerance (default 1e-3 r_safety)")
    s.add_argument("--max-iters", type=int, default=20000)
    s.add_argument("--scheme", choices=tuple(hj_solver.SCHEMES), default="weno3", help="spatial scheme and its time stepper")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("radius", help="certified potential conflict range of a worst-case field")
    r.add_argument("field")
    r.add_argument("--r-safety", required=True, help="safety distance, e.g. '2200 ft' or 0.5")
    r.set_defaults(func=cmd_radius)

    m = sub.add_parser("simulate", help="run seeded episodes from a config file")
    m.add_argument("config")
    m.add_argument("--seeds", type=_ints, default=(0,))
    m.add_argument("--episodes", type=int)
    m.add_argument("--out", required=True, help="output directory")
    m.add_argument("--jobs", type=int, help="worker processes (default: logical cores)")
    m.add_argument("--filter", choices=("off", "prioritized", "cooperative-only"))
    m.set_defaults(func=cmd_simulate)

    t = sub.add_parser("metrics", help="recompute metrics from trace CSV files")
    t.add_argument("traces", nargs="+")
    t.add_argument("--config")
    t.add_argument("--r-safety", type=float)
    t.add_argument("--r-conflict", type=float)
    t.add_argument("--horizon", type=float)
    t.add_argument("--waypoints", type=int, help="waypoints per agent")
    t.add_argument("--series", help="write per-tick minimum distance CSV")
    t.set_defaults(func=cmd_metrics)

    d = sub.add_parser("dump-slice", help="2D slice of a field as CSV")
    d.add_argument("field")
    d.add_argument("--axes", type=_ints, default=(0, 1))
    d.add_argument("--fix", action="append", help="axis=value for a fixed axis (repeatable)")
    d.add_argument("--out")
    d.set_defaults(func=cmd_dump_slice)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except (ParseError, SchemaMismatch, EmptyTrace) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BRTTouchesBoundary, NonConvergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, CorruptPayload, FormatVersionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PairSafeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
