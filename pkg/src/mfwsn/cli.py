"""Command-line front end.

Exit codes: 0 success, 2 configuration or model error, 3 numeric failure.
Data goes to ``--out`` (or stdout).  When ``--out`` is given, a run
manifest is written next to it as ``<out>.manifest.json``, so the data
file itself stays byte-identical across runs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from mfwsn import __version__
from mfwsn.capture import ChannelModel, LogNormal, Uniform, capture_probability, tabulate_q
from mfwsn.errors import ModelError, NumericError, ParameterError
from mfwsn.model import initial_occupancy, load_model
from mfwsn.odes import (DEFAULT_HORIZON, RandomClosure, RemainderClosure, basin_grid,
                        distinct_fixpoints, export_vector_field_grid, find_fixpoint, integrate)
from mfwsn.pctmc import CONVENTIONS, INTERFERENCE_TOTAL, build_pctmc
from mfwsn.ssa import convergence_study, round_to_lattice, simulate


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    model_hash: str | None = None
    tool_version: str = __version__
    seeds: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    wall_clock: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)


def _fmt(v):
    return repr(float(v))


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _emit(args, text, manifest):
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        manifest.wall_clock["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        Path(str(out) + ".manifest.json").write_text(
            json.dumps(asdict(manifest), indent=2, default=_jsonable) + "\n")
    else:
        sys.stdout.write(text)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


def _manifest(args, bundle=None, **extra):
    config = {k: v for k, v in vars(args).items() if k != "func"}
    m = RunManifest(args.command, config, bundle.digest() if bundle else None, **extra)
    m.wall_clock["started"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    return m


def _model(args):
    bundle = load_model(args.model)
    pctmc = build_pctmc(bundle, N=args.N, convention=args.convention,
                        q=_table(bundle, args))
    return bundle, pctmc


def _table(bundle, args):
    if not getattr(args, "q_table", 0):
        return None
    N = args.N or bundle.N
    i_max = max(N if bundle.broadcast is None else bundle.broadcast.d, 1.0)
    # small headroom: N * x can exceed N by rounding
    return tabulate_q(bundle.channel, float(i_max) * 1.001 + 1.0, args.q_table)


def _x0(bundle, spec):
    if not spec:
        return bundle.x0
    parts = {}
    for item in spec.split(","):
        state, _, frac = item.partition("=")
        if not _:
            raise ParameterError(f"--x0 entries look like state=fraction, got {item!r}")
        parts[state.strip()] = float(frac)
    return initial_occupancy(bundle.component, parts)


def _state_index(bundle, name):
    try:
        return bundle.component.index(name)
    except ModelError:
        raise ParameterError(f"unknown state {name!r}") from None


def cmd_q_curve(args):
    if args.model:
        channel = load_model(args.model).channel
    else:
        spatial = Uniform() if args.spatial == "uniform" else LogNormal(args.sigma_d)
        channel = ChannelModel(args.beta, args.z, spatial)
    if args.n_points < 2:
        raise argparse.ArgumentTypeError("--n-points must be at least 2")
    grid = np.linspace(0.0, args.i_max, args.n_points)
    q = capture_probability(grid, channel)
    m = _manifest(args)
    m.config["channel"] = channel.to_json()
    _emit(args, _csv(["i", "q"], zip(grid, q)), m)


def cmd_transform(args):
    bundle, pctmc = _model(args)
    listing = {"states": list(pctmc.states), "N": pctmc.N, "metadata": pctmc.metadata,
               "transitions": pctmc.listing()}
    if args.format == "json":
        text = json.dumps(listing, indent=2) + "\n"
    else:
        text = pctmc.ode_text()
    if args.json:
        Path(args.json).write_text(json.dumps(listing, indent=2) + "\n")
    _emit(args, text, _manifest(args, bundle))


def cmd_integrate(args):
    bundle, pctmc = _model(args)
    traj = integrate(pctmc, _x0(bundle, args.x0), args.T, rtol=args.rtol, atol=args.atol,
                     n_out=args.n_out)
    header = ["t"] + [f"x_{k}" for k in range(pctmc.n)]
    rows = ([t, *x] for t, x in zip(traj.times, traj.points))
    m = _manifest(args, bundle, tolerances={"rtol": args.rtol, "atol": args.atol})
    m.results = {"states": list(pctmc.states), "metadata": traj.metadata}
    _emit(args, _csv(header, rows), m)


def _seed_fixpoints(bundle, pctmc, args):
    starts = [_x0(bundle, s) for s in args.x0] if getattr(args, "x0", None) else list(np.eye(pctmc.n))
    found = [find_fixpoint(pctmc, s, tol=args.tol, T=args.T) for s in starts]
    return distinct_fixpoints(found, radius=1e-6)


def cmd_fixpoints(args):
    bundle, pctmc = _model(args)
    fps = _seed_fixpoints(bundle, pctmc, args)
    out = [f.to_json() for f in fps]
    m = _manifest(args, bundle, tolerances={"tol": args.tol})
    m.results = {"states": list(pctmc.states)}
    _emit(args, json.dumps(out, indent=2) + "\n", m)


def _closure(bundle, pctmc, axes, args):
    if args.closure == "random":
        return RandomClosure(k=args.k, seed=args.seed)
    if args.closure:
        return RemainderClosure(_state_index(bundle, args.closure))
    rest = [s for s in range(pctmc.n) if s not in axes]
    return RemainderClosure(rest[0])


def _axes(bundle, spec):
    names = [s.strip() for s in spec.split(",")]
    if len(names) != 2:
        raise ParameterError("--axes takes two state names, e.g. O,R")
    return tuple(_state_index(bundle, s) for s in names)


def cmd_basin(args):
    bundle, pctmc = _model(args)
    axes = _axes(bundle, args.axes)
    fps = _seed_fixpoints(bundle, pctmc, args)
    stable = [f for f in fps if f.tag == "stable"] or fps
    grid = basin_grid(pctmc, axes[0], axes[1], args.resolution,
                      _closure(bundle, pctmc, axes, args), stable, T=args.T,
                      threads=args.threads)
    header = ["axis_i", "axis_j", "fixpoint_index"]
    random = args.closure == "random"
    if random:
        header += [f"share_{k}" for k in range(len(stable))] + ["share_unresolved"]
    rows = ([a, b, k, *(fr.tolist() if random else [])] for a, b, k, fr in grid.rows())
    m = _manifest(args, bundle, seeds={"closure": args.seed} if random else {})
    m.results = {"fixpoints": [f.to_json() for f in stable], "coverage": grid.coverage(),
                 "axes": [pctmc.states[a] for a in axes]}
    _emit(args, _csv(header, rows), m)


def cmd_field(args):
    bundle, pctmc = _model(args)
    axes = _axes(bundle, args.axes)
    a, b, pts, ders = export_vector_field_grid(pctmc, axes[0], axes[1], args.resolution,
                                               _closure(bundle, pctmc, axes, args))
    n = pctmc.n
    header = ["cell_i", "cell_j"] + [f"x_{k}" for k in range(n)] + [f"dx_{k}" for k in range(n)]
    rows = ([int(i), int(j), *p, *d] for i, j, p, d in zip(a, b, pts, ders))
    _emit(args, _csv(header, rows), _manifest(args, bundle))


def cmd_simulate(args):
    bundle, pctmc = _model(args)
    x0 = round_to_lattice(_x0(bundle, args.x0), pctmc.N)
    traj = simulate(pctmc, x0, args.T, seed=args.seed)
    header = ["t"] + [f"x_{k}" for k in range(pctmc.n)]
    rows = ([t, *x] for t, x in zip(traj.times, traj.points))
    m = _manifest(args, bundle, seeds={"seed": args.seed})
    m.results = {"states": list(pctmc.states), "events": int(traj.times.size - 1)}
    _emit(args, _csv(header, rows), m)


def cmd_compare(args):
    bundle = load_model(args.model)
    Ns = [int(v) for v in args.Ns.split(",")]
    x0 = _x0(bundle, args.x0)
    report = convergence_study(
        lambda N: build_pctmc(bundle, N=N, convention=args.convention), Ns, x0, args.T,
        args.replications, seed=args.seed, threads=args.threads)
    m = _manifest(args, bundle, seeds={"master": args.seed})
    m.results = report.metadata()
    _emit(args, _csv(["N", "mean_sup_error", "std_sup_error"], report.rows()), m)


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _add_model(p, n_required=False):
    p.add_argument("model", help="model file path or bundled name (aloha3.json, discovery6.json)")
    p.add_argument("--N", type=_positive_int, required=n_required, default=None,
                   help="system size (default: the model file's N)")
    p.add_argument("--convention", choices=CONVENTIONS, default=INTERFERENCE_TOTAL,
                   help="q argument rule for broadcast reception")
    p.add_argument("--q-table", type=int, default=0, metavar="POINTS",
                   help="use a tabulated q with this many points instead of direct evaluation")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--threads", type=_positive_int, default=1)


def build_parser():
    parser = argparse.ArgumentParser(prog="mfwsn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("q-curve", help="capture probability q(i) as CSV")
    p.add_argument("--model")
    p.add_argument("--beta", type=float, default=4.0)
    p.add_argument("--z", type=float, default=10.0)
    p.add_argument("--spatial", choices=("uniform", "lognormal"), default="uniform")
    p.add_argument("--sigma-d", type=float, default=2.0)
    p.add_argument("--i-max", type=float, default=10.0)
    p.add_argument("--n-points", type=_positive_int, default=101)
    p.add_argument("--out")
    p.set_defaults(func=cmd_q_curve)

    p = sub.add_parser("transform", help="print the generated ODE system")
    _add_model(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--json", help="also write the JSON listing to this file")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("integrate", help="integrate the mean-field ODEs")
    _add_model(p)
    p.add_argument("--x0", help="initial occupancy, e.g. O=1 or T=0.5,R=0.5")
    p.add_argument("--T", type=float, default=2000.0)
    p.add_argument("--rtol", type=float, default=1e-8)
    p.add_argument("--atol", type=float, default=1e-10)
    p.add_argument("--n-out", type=int, default=1001)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("fixpoints", help="equilibria reached from the simplex vertices")
    _add_model(p)
    p.add_argument("--x0", action="append", help="starting point (repeatable)")
    p.add_argument("--T", type=float, default=DEFAULT_HORIZON)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_fixpoints)

    for name, func, hlp in (("basin", cmd_basin, "basins of attraction on a 2-D grid"),
                            ("field", cmd_field, "vector field on a 2-D grid")):
        p = sub.add_parser(name, help=hlp)
        _add_model(p)
        p.add_argument("--axes", required=True, help="two state names, e.g. O,R")
        p.add_argument("--resolution", type=int, default=50)
        p.add_argument("--closure", help="state receiving the remainder, or 'random'")
        p.add_argument("--k", type=_positive_int, default=16, help="random completions per cell")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--T", type=float, default=DEFAULT_HORIZON)
        p.add_argument("--tol", type=float, default=1e-10)
        p.set_defaults(func=func)

    p = sub.add_parser("simulate", help="exact stochastic simulation")
    _add_model(p)
    p.add_argument("--x0")
    p.add_argument("--T", type=float, default=200.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="SSA-vs-ODE sup-norm error across system sizes")
    _add_model(p)
    p.add_argument("--Ns", required=True, help="comma-separated increasing sizes")
    p.add_argument("--x0")
    p.add_argument("--T", type=float, default=200.0)
    p.add_argument("--replications", type=_positive_int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    except (ModelError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
