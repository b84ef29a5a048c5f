"""Command-line interface.

::

    quasi-einstein solve {1d,surface,rotsym,doubly,phase,schwarzschild} [options]
    quasi-einstein verify (--all | --target ID ... | --trajectory CSV JSON) [--check NAME ...]
    quasi-einstein catalog list
    quasi-einstein catalog emit ID [--n N] [--m M] [--samples K]

Options for ``solve`` can also come from ``--config FILE`` (a JSON object
whose keys are the option names with dashes replaced by underscores).
Explicit flags override the file, which overrides built-in defaults.

Output formats
--------------
Trajectory CSV: header ``t,<state...>,mu,C`` then one row per accepted
step, 17 significant digits. Trajectory JSON: ``kind``, ``spec`` (``n``,
``m``, ``lambda``, ``mu``, ``fiber``), ``state``, ``samples``, ``t_start``,
``t_end``, ``termination``, ``events``, ``mu_mean``, ``mu_drift``, ``meta``.
Verify report JSON: ``summary``, ``reports`` (``check``, ``target``,
``residual``, ``tolerance``, ``passed``, ``samples``, ``notes``,
``expect_fail``) and ``skipped``.

Exit codes: 0 success, 2 usage error, 3 solver failure, 4 failed check.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from typing import Sequence

import numpy as np

from . import catalog, ode, verify
from .curvature import warped_curvature
from .errors import BlowUp, MaxIterations, NoBracket, QEError, UnknownId
from .model import ModelSpec, validate_spec

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4
SOLVER_ERRORS = (BlowUp, NoBracket, MaxIterations)

SOLVE_DEFAULTS = {
    "1d": {"lam": 3.0, "m": 3.0, "w0": 1.0, "dw0": 0.0, "tmin": -10.0, "tmax": 10.0},
    "surface": {"lam": 0.0, "m": 2.0, "mu": None, "mode": "polar", "w0": 1.0, "dw0": 0.0,
                "t0": 0.0, "tmax": 10.0},
    "rotsym": {"n": 3, "m": 2.0, "lam": 4.0, "mu": 1.0, "link": "sphere", "start": "pole",
               "w0": 0.2535542586, "psi_b": None, "psi": None, "dpsi": None, "dw": None,
               "t0": 0.0, "t1": 10.0, "find_disk": None},
    "doubly": {"m": 2.0, "lam": -1.0, "phi0": 1.0, "dphi0": 0.3, "psi0": 1.0, "dpsi0": -0.2,
               "w0": 1.0, "dw0": 0.0, "tmax": 0.5},
    "phase": {"n": 3, "m": 2.0, "x0": 0.0, "y0": 1.0, "t0": 1.0, "t1": 10.0, "backward": False},
    "schwarzschild": {"m": 2.0, "tmax": 10.0},
}


class UsageError(Exception):
    """Invalid command-line input (exit status 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _dump_json(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=True) + "\n"


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="quasi-einstein", description="Quasi-Einstein metrics: solve, verify, catalog.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="integrate an ODE reduction")
    ss = s.add_subparsers(dest="kind", required=True, parser_class=_Parser)

    def common(q):
        q.add_argument("--config", help="JSON file with option values")
        q.add_argument("--out", help="output prefix for .csv and .json (default: solve-KIND)")
        return q

    q = common(ss.add_parser("1d", help="one-dimensional base"))
    q.add_argument("--lambda", dest="lam", type=float)
    q.add_argument("--m", type=float)
    q.add_argument("--w0", type=float)
    q.add_argument("--dw0", type=float)
    q.add_argument("--tmin", type=float)
    q.add_argument("--tmax", type=float)

    q = common(ss.add_parser("surface", help="two-dimensional base"))
    q.add_argument("--lambda", dest="lam", type=float)
    q.add_argument("--m", type=float)
    q.add_argument("--mu", type=float)
    q.add_argument("--mode", choices=("polar", "cartesian"))
    q.add_argument("--w0", type=float)
    q.add_argument("--dw0", type=float)
    q.add_argument("--t0", type=float)
    q.add_argument("--tmax", type=float)

    q = common(ss.add_parser("rotsym", help="base dt^2 + psi^2 g_L"))
    q.add_argument("--n", type=int)
    q.add_argument("--m", type=float)
    q.add_argument("--lambda", dest="lam", type=float)
    q.add_argument("--mu", type=float)
    q.add_argument("--link", choices=("sphere", "flat", "hyperbolic"))
    q.add_argument("--start", choices=("pole", "boundary", "regular"))
    q.add_argument("--w0", type=float)
    q.add_argument("--psi-b", dest="psi_b", type=float)
    q.add_argument("--psi", type=float)
    q.add_argument("--dpsi", type=float)
    q.add_argument("--dw", type=float)
    q.add_argument("--t0", type=float)
    q.add_argument("--t1", type=float)
    q.add_argument("--find-disk", dest="find_disk", type=float, nargs=2, metavar=("LO", "HI"),
                   help="bracket of axis values w(0) in which to locate a disk")

    q = common(ss.add_parser("doubly", help="three-dimensional doubly warped base"))
    q.add_argument("--m", type=float)
    q.add_argument("--lambda", dest="lam", type=float)
    for name in ("phi0", "dphi0", "psi0", "dpsi0", "w0", "dw0", "tmax"):
        q.add_argument(f"--{name}", type=float)

    q = common(ss.add_parser("phase", help="planar system in x = psi'/psi, y = w'/w"))
    q.add_argument("--n", type=int)
    q.add_argument("--m", type=float)
    for name in ("x0", "y0", "t0", "t1"):
        q.add_argument(f"--{name}", type=float)
    q.add_argument("--backward", action="store_true", default=None)

    q = common(ss.add_parser("schwarzschild", help="lam = 0 surface with w'^2 = 1 - w^(1-m)"))
    q.add_argument("--m", type=float)
    q.add_argument("--tmax", type=float)

    v = sub.add_parser("verify", help="run identity checks")
    g = v.add_mutually_exclusive_group(required=True)
    g.add_argument("--all", action="store_true", help="every catalog entry plus controls")
    g.add_argument("--target", action="append", help="catalog id or control id (repeatable)")
    g.add_argument("--trajectory", nargs=2, metavar=("CSV", "JSON"), help="solver output files")
    v.add_argument("--check", action="append", choices=verify.CHECKS, help="restrict checks")
    v.add_argument("--samples", type=int, default=25)
    v.add_argument("--report", default="verify-report.json", help="JSON report path")

    c = sub.add_parser("catalog", help="closed-form example families")
    cs = c.add_subparsers(dest="action", required=True, parser_class=_Parser)
    lst = cs.add_parser("list")
    lst.add_argument("--json", action="store_true", help="print full entries as JSON")
    e = cs.add_parser("emit")
    e.add_argument("id")
    e.add_argument("--n", type=int)
    e.add_argument("--m", type=float)
    e.add_argument("--samples", type=int, default=101)
    e.add_argument("--out", help="CSV path (default: stdout)")
    return p


def resolve_options(kind: str, args: argparse.Namespace) -> dict:
    """Merge flags over the ``--config`` file over defaults."""
    opts = dict(SOLVE_DEFAULTS[kind])
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        if "lambda" in cfg:
            cfg["lam"] = cfg.pop("lambda")
        unknown = set(cfg) - set(opts)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        opts.update(cfg)
    for key in opts:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return opts


# ---------------------------------------------------------------------------
# solve

def _solve(kind: str, o: dict) -> ode.Trajectory:
    if kind == "1d":
        spec = ModelSpec(n=1, m=o["m"], lam=o["lam"])
        return ode.solve_1d(spec, o["w0"], o["dw0"], (o["tmin"], o["tmax"]))
    if kind == "surface":
        spec = ModelSpec(n=2, m=o["m"], lam=o["lam"], mu=o["mu"])
        init = {"w0": o["w0"]} if o["mode"] == "polar" else {"t0": o["t0"], "w0": o["w0"], "dw0": o["dw0"]}
        return ode.solve_surface(spec, init, o["mode"], t_max=o["tmax"])
    if kind == "rotsym":
        spec = ModelSpec(n=o["n"], m=o["m"], lam=o["lam"], mu=o["mu"],
                         boundary=o["start"] == "boundary" or o["find_disk"] is not None)
        if o["find_disk"] is not None:
            return ode.find_disk(validate_spec(spec), tuple(o["find_disk"]))
        if o["start"] == "pole":
            init = {"pole": True, "w0": o["w0"]}
        elif o["start"] == "boundary":
            if o["psi_b"] is None:
                raise UsageError("boundary start needs --psi-b")
            init = {"boundary": True, "psi_b": o["psi_b"]}
        else:
            missing = [k for k in ("psi", "dpsi", "w0", "dw") if o[k] is None]
            if missing:
                raise UsageError(f"regular start needs {missing}")
            init = {"psi": o["psi"], "dpsi": o["dpsi"], "w": o["w0"], "dw": o["dw"]}
        return ode.solve_rotsym(spec, o["link"], init, (o["t0"], o["t1"]))
    if kind == "doubly":
        spec = ModelSpec(n=3, m=o["m"], lam=o["lam"])
        return ode.solve_doubly_warped_3d(spec, o["phi0"], o["dphi0"], o["psi0"], o["dpsi0"],
                                          o["w0"], (0.0, o["tmax"]), dw0=o["dw0"])
    if kind == "phase":
        return ode.phase_plane_flow(o["n"], o["m"], o["x0"], o["y0"], (o["t0"], o["t1"]),
                                    "backward" if o["backward"] else "forward")
    if kind == "schwarzschild":
        return ode.schwarzschild_solve(o["m"], (0.0, o["tmax"]))
    raise UsageError(f"unknown solve kind {kind!r}")


def cmd_solve(args) -> int:
    opts = resolve_options(args.kind, args)
    traj = _solve(args.kind, opts)
    prefix = args.out or f"solve-{args.kind}"
    traj.to_csv(prefix + ".csv")
    doc = traj.to_json()
    doc["options"] = opts
    ode.atomic_write(prefix + ".json", _dump_json(doc))
    print(f"{traj.kind}: {traj.t.size} samples on [{traj.t_start:.6g}, {traj.t_end:.6g}], "
          f"termination={traj.termination}; wrote {prefix}.csv, {prefix}.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify

def cmd_verify(args) -> int:
    if args.all:
        targets = verify.default_targets()
    elif args.trajectory:
        targets = [verify.target_from_files(*args.trajectory)]
    else:
        targets = args.target
    result = verify.run_suite(targets, args.check, samples=args.samples)
    for r in result.reports:
        print(r.line())
    for tid, chk, why in result.skipped:
        print(f"{'SKIP':<22} {tid:<24} {chk:<32} {why}")
    s = result.summary()
    print(f"{s['checks']} checks, {s['passed']} passed, {s['expected_failures']} expected failures, "
          f"{s['unexpected']} unexpected, {s['skipped']} skipped")
    ode.atomic_write(args.report, _dump_json(result.to_json()))
    return EXIT_OK if result.ok else EXIT_VERIFY


# ---------------------------------------------------------------------------
# catalog

def _entry_rows(entry: catalog.CatalogEntry, samples: int):
    t = entry.samples(samples, margin=1e-3)
    fr = warped_curvature(entry.model, t)
    psi = entry.model.psi.value(t) * np.ones_like(t)
    ric_LL = fr.ric_LL if entry.spec.n > 1 else np.zeros_like(t)
    return ["t", "psi", "w", "ric_tt", "ric_LL"], zip(t, psi, fr.w, fr.ric_tt * np.ones_like(t), ric_LL)


def _family_rows(fam: catalog.GaussianFamily, samples: int):
    t = np.linspace(fam.window[0], fam.window[1], samples)
    rows = []
    for m in fam.m_list:
        wm = catalog.w_power_m(fam.lam, fam.n, m, t)
        rows.extend(zip(np.full(t.size, float(m)), t, wm, fam.limit(t)))
    return ["m", "t", "w_pow_m", "limit"], rows


def cmd_catalog(args) -> int:
    if args.action == "list":
        if args.json:
            docs = []
            for ident in catalog.catalog_ids():
                obj = catalog.get(ident)
                if isinstance(obj, catalog.CatalogEntry):
                    docs.append(obj.describe())
                else:
                    docs.append({"id": ident, "family": catalog.REGISTRY[ident][1],
                                 "m": list(obj.m_list), "sup_distance": list(obj.sup_distance)})
            print(_dump_json(docs), end="")
        else:
            for ident, (_, desc) in catalog.REGISTRY.items():
                print(f"{ident:<20} {desc}")
        return EXIT_OK
    obj = catalog.get(args.id, n=args.n, m=args.m)
    if isinstance(obj, catalog.GaussianFamily):
        header, rows = _family_rows(obj, args.samples)
    else:
        header, rows = _entry_rows(obj, args.samples)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([_fmt(v) for v in row])
    if args.out:
        ode.atomic_write(args.out, buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


# ---------------------------------------------------------------------------

def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    handler = {"solve": cmd_solve, "verify": cmd_verify, "catalog": cmd_catalog}[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (UnknownId, QEError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
