"""Command-line interface: counting, constants, solvers, detection, flows,
energies, and the end-to-end quantitative counting experiment.

Every run that writes a CSV or JSON file also appends a record to a
".manifest.json" sidecar (JSON lines, append-only) with the command line,
form hash, seeds, parameters, and wall time, so outputs are reproducible.
Exit codes: 0 success, 2 input error, 3 budget error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from . import __version__
from . import dynamics, exceptional, lattice, mainterm
from .energy import (PointCloud, energy as energy_at, expansion_check,
                     projection_decay_experiment, varpi)
from .errors import BudgetExceeded, OppLabError
from .qform import QForm, load_form, normalize_det


def _fmt(x) -> str:
    """CSV number formatting: 12 significant digits."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def _write_manifest(out_path: str, argv, form, params: dict, seeds,
                    norm_kind, wall: float, outputs):
    record = {
        "command": ["opplab"] + list(argv),
        "form_hash": form.content_hash() if form is not None else None,
        "seeds": seeds,
        "norm_kind": norm_kind,
        "params": params,
        "version": __version__,
        "wall_time_s": wall,
        "outputs": list(outputs),
    }
    with open(out_path + ".manifest.json", "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def _emit(args, argv, payload, form=None, seeds=None, norm_kind=None,
          params=None, wall=0.0, csv_rows=None, csv_header=None):
    """Print JSON to stdout, or write CSV/JSON plus manifest when --out given."""
    out = getattr(args, "out", None)
    if out is None:
        json.dump(payload, sys.stdout, indent=2, default=float)
        sys.stdout.write("\n")
        return
    if csv_rows is not None:
        with open(out, "w") as fh:
            fh.write(",".join(csv_header) + "\n")
            for row in csv_rows:
                fh.write(",".join(_fmt(x) for x in row) + "\n")
    else:
        with open(out, "w") as fh:
            json.dump(payload, fh, indent=2, default=float)
            fh.write("\n")
    _write_manifest(out, argv, form, params or {}, seeds, norm_kind, wall, [out])


def _load_normalized(path: str) -> QForm:
    q, _scale = normalize_det(load_form(path))
    return q


def _parse_testfn(spec: str) -> dynamics.TestFunction:
    """Parse --f specs: 'ball:R', 'box:rx[,ry,rz]', 'bump:rx[,ry,rz[,taper]]', 'zero'."""
    if spec == "zero":
        return dynamics.TestFunction.zero()
    kind, _, rest = spec.partition(":")
    vals = [float(x) for x in rest.split(",")] if rest else []
    if kind == "ball" and len(vals) == 1:
        return dynamics.TestFunction.ball(vals[0])
    if kind == "box" and len(vals) in (1, 3):
        return dynamics.TestFunction.box(*vals)
    if kind == "bump" and len(vals) in (1, 3, 4):
        if len(vals) == 4:
            return dynamics.TestFunction.bump(vals[0], vals[1], vals[2],
                                              taper=vals[3])
        return dynamics.TestFunction.bump(*vals)
    raise OppLabError(f"cannot parse test function spec {spec!r}")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="opplab",
        description="Value statistics of indefinite ternary quadratic forms "
                    "at integer points, and the flow averages behind them.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("count", help="exact shell counts; CSV schema: "
                                     "T,a,b,total,primitive,elapsed_s")
    c.add_argument("--form", required=True)
    c.add_argument("--a", type=float, required=True)
    c.add_argument("--b", type=float, required=True)
    c.add_argument("--T", required=True,
                   help="radius, or comma-separated list for a CSV scan")
    c.add_argument("--primitive", action="store_true")
    c.add_argument("--norm", choices=lattice.NORM_KINDS, default="euclidean")
    c.add_argument("--out", help="CSV output path (writes manifest sidecar)")

    c = sub.add_parser("cq", help="main-term constant; JSON {value, stderr, method, nodes}")
    c.add_argument("--form", required=True)
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--method", choices=("quadrature", "montecarlo"),
                   default="quadrature")
    c.add_argument("--samples", type=int, default=10**6)
    c.add_argument("--T-ref", type=float, default=50.0)
    c.add_argument("--width", type=float, default=0.2)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")

    c = sub.add_parser("solve", help="primitive v minimizing |Q(v) - s|")
    c.add_argument("--form", required=True)
    c.add_argument("--s", type=float, default=0.0)
    c.add_argument("--T", type=float, required=True)
    c.add_argument("--norm", choices=lattice.NORM_KINDS, default="euclidean")
    c.add_argument("--out")

    c = sub.add_parser("exceptional", help="detect exceptional lines and planes")
    c.add_argument("--form", required=True)
    c.add_argument("--rho", type=float, default=0.05)
    c.add_argument("--A", type=float, default=20.0)
    c.add_argument("--t", type=float, required=True)
    c.add_argument("--out")

    c = sub.add_parser("approx", help="best rational approximant {P, lambda, distance}")
    c.add_argument("--form", required=True)
    c.add_argument("--N", type=int, default=3, help="exhaustive height bound")
    c.add_argument("--five", help="JSON list of five integer vectors "
                                  "(uses the almost-null construction instead)")
    c.add_argument("--out")

    c = sub.add_parser("flow", help="circle averages and K-integrals; CSV rows (t, value, gap)")
    c.add_argument("--op", choices=("average", "moment", "jcheck", "decay"),
                   required=True)
    c.add_argument("--form")
    c.add_argument("--t", required=True, help="flow time, or comma-separated list")
    c.add_argument("--nodes", type=int, default=1 << 12)
    c.add_argument("--f", default="ball:1.5", help="test function spec")
    c.add_argument("--p", type=float, default=0.5, help="moment exponent")
    c.add_argument("--index", type=int, choices=(1, 2), default=1)
    c.add_argument("--v", help="comma-separated vector for jcheck/decay")
    c.add_argument("--delta", type=float, default=0.1)
    c.add_argument("--sigma", type=float)
    c.add_argument("--out")

    c = sub.add_parser("energy", help="weight-space energies and decay experiments")
    c.add_argument("--op", choices=("energy", "varpi", "expansion", "projection"),
                   required=True)
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--ell", type=float, default=1.5)
    c.add_argument("--n", type=int, default=2000)
    c.add_argument("--trials", type=int, default=20)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--d", type=float, default=2.0)
    c.add_argument("--w", help="comma-separated 5 coordinates")
    c.add_argument("--delta", type=float, default=0.0)
    c.add_argument("--points", help="JSON file with an (n, 5) coordinate list")
    c.add_argument("--out")

    c = sub.add_parser("experiment",
                       help="headline counting experiment; CSV: T,total,main,"
                            "R_T,residual,residual_over_T")
    c.add_argument("--form", required=True)
    c.add_argument("--a", type=float, default=-0.5)
    c.add_argument("--b", type=float, default=0.5)
    c.add_argument("--T-list", required=True, help="ascending comma-separated radii")
    c.add_argument("--rho", type=float, default=0.05)
    c.add_argument("--A", type=float, default=20.0)
    c.add_argument("--norm", choices=lattice.NORM_KINDS, default="euclidean")
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--out")
    return p


def experiment_quantitative(q: QForm, a: float, b: float, T_list,
                            rho: float = 0.05, A: float = 20.0,
                            norm_kind: str = "euclidean", tol: float = 1e-8):
    """Rows (T, total, main, R_T, residual, residual/T) comparing the exact
    count with C_Q (b - a) T plus the special count on detected subspaces."""
    T_list = list(T_list)
    if any(T_list[i] >= T_list[i + 1] for i in range(len(T_list) - 1)):
        raise OppLabError("--T-list must be strictly ascending")
    rows = []
    if not T_list:
        return rows
    cq = mainterm.cq_quadrature(q, tol).value
    for T in T_list:
        total = lattice.count_in_shell(q, a, b, T, norm_kind=norm_kind).total
        exc = exceptional.detect_exceptional(q, rho, A, math.log(T))
        r_t = exceptional.special_count(q, exc, a, b, T, norm_kind=norm_kind)
        main = cq * (b - a) * T
        residual = total - main - r_t
        rows.append((T, total, main, r_t, residual, residual / T))
    return rows


def _cmd_count(args, argv):
    q = _load_normalized(args.form)
    Ts = [float(x) for x in str(args.T).split(",")]
    rows = []
    for T in Ts:
        res = lattice.count_in_shell(q, args.a, args.b, T,
                                     primitive_only=args.primitive,
                                     norm_kind=args.norm)
        rows.append((res.T, res.a, res.b, res.total, int(res.primitive_only),
                     res.elapsed))
    payload = [{"T": r[0], "a": r[1], "b": r[2], "total": r[3],
                "primitive": bool(r[4]), "elapsed_s": r[5]} for r in rows]
    _emit(args, argv, payload if len(payload) > 1 else payload[0], form=q,
          norm_kind=args.norm, params={"a": args.a, "b": args.b, "T": Ts},
          csv_rows=rows, csv_header=("T", "a", "b", "total", "primitive",
                                     "elapsed_s"))
    return 0


def _cmd_cq(args, argv):
    q = _load_normalized(args.form)
    t0 = time.perf_counter()
    if args.method == "quadrature":
        est = mainterm.cq_quadrature(q, args.tol)
    else:
        est = mainterm.cq_montecarlo(q, args.samples, args.T_ref, args.width,
                                     args.seed)
    payload = {"value": est.value, "stderr": est.stderr, "method": est.method,
               "nodes": est.samples_or_nodes}
    _emit(args, argv, payload, form=q, seeds=[args.seed],
          params={"tol": args.tol, "method": args.method},
          wall=time.perf_counter() - t0)
    return 0


def _cmd_solve(args, argv):
    q = _load_normalized(args.form)
    vec, residual = lattice.min_value_solve(q, args.s, args.T,
                                            norm_kind=args.norm)
    _emit(args, argv, {"vector": list(vec), "residual": residual,
                       "s": args.s, "T": args.T},
          form=q, norm_kind=args.norm, params={"s": args.s, "T": args.T})
    return 0


def _cmd_exceptional(args, argv):
    q = _load_normalized(args.form)
    exc = exceptional.detect_exceptional(q, args.rho, args.A, args.t)
    payload = {
        "params": {"rho": args.rho, "A": args.A, "t": args.t},
        "lines": [{"vector": list(e.vector), "height": e.height,
                   "value": e.value} for e in exc.lines],
        "planes": [{"covector": list(e.covector),
                    "basis": [list(e.basis[0]), list(e.basis[1])],
                    "heights": list(e.heights), "dual_value": e.dual_value}
                   for e in exc.planes],
        "over_budget": exc.over_budget(),
    }
    _emit(args, argv, payload, form=q,
          params={"rho": args.rho, "A": args.A, "t": args.t})
    return 0


def _cmd_approx(args, argv):
    q = _load_normalized(args.form)
    if args.five:
        vecs = json.loads(args.five)
        approx = exceptional.rational_from_five(q, *vecs)
    else:
        approx = exceptional.diophantine_quality(q, args.N)
    _emit(args, argv, approx.to_dict(), form=q, params={"N": args.N})
    return 0


def _cmd_flow(args, argv):
    ts = [float(x) for x in str(args.t).split(",")]
    f = _parse_testfn(args.f)
    g = np.eye(3)
    q = None
    if args.form:
        q = _load_normalized(args.form)
        from .qform import factor_gq
        g = factor_gq(q).matrix
    rows = []
    for t in ts:
        if args.op == "average":
            res = dynamics.circle_average(f, None, t, g, nodes=args.nodes)
            rows.append((t, res.value, res.richardson_gap))
        elif args.op == "moment":
            val = dynamics.alpha_moment(g, t, args.p, args.index,
                                        nodes=args.nodes)
            rows.append((t, val, 0.0))
        elif args.op == "jcheck":
            if not args.v:
                raise OppLabError("--v is required for jcheck")
            v = np.array([float(x) for x in args.v.split(",")])
            lhs, rhs, relerr = dynamics.emm_calculus_check(
                f, lambda d: np.ones(np.atleast_2d(d).shape[0]), v, t,
                nodes=args.nodes)
            rows.append((t, lhs, relerr))
        else:
            if not args.v:
                raise OppLabError("--v is required for decay")
            v = np.array([float(x) for x in args.v.split(",")])
            integral, ratio = dynamics.kintegral_decay(
                v, t, args.delta, args.sigma, nodes=args.nodes)
            rows.append((t, integral, ratio))
    payload = [{"t": r[0], "value": r[1], "gap": r[2]} for r in rows]
    _emit(args, argv, payload if len(payload) > 1 else payload[0], form=q,
          params={"op": args.op, "nodes": args.nodes, "f": args.f},
          csv_rows=rows, csv_header=("t", "value", "gap"))
    return 0


def _cmd_energy(args, argv):
    if args.op == "varpi":
        payload = {"alpha": args.alpha, "varpi": varpi(args.alpha),
                   "seed": args.seed}
    elif args.op == "expansion":
        if not args.w:
            raise OppLabError("--w is required for expansion")
        w = np.array([float(x) for x in args.w.split(",")])
        integral, normalized = expansion_check(w, args.d, args.alpha)
        payload = {"integral": integral, "normalized": normalized,
                   "d": args.d, "alpha": args.alpha, "seed": args.seed}
    elif args.op == "energy":
        if not args.points or not args.w:
            raise OppLabError("--points and --w are required for energy")
        with open(args.points) as fh:
            pts = np.array(json.load(fh), dtype=float)
        cloud = PointCloud(pts, args.alpha, args.delta)
        w = np.array([float(x) for x in args.w.split(",")])
        payload = {"energy": energy_at(cloud, w), "alpha": args.alpha,
                   "delta": args.delta, "seed": args.seed}
    else:
        stats = projection_decay_experiment(args.n, args.alpha,
                                                   args.ell, args.trials,
                                                   args.seed)
        payload = stats.to_dict()
    _emit(args, argv, payload, seeds=[args.seed],
          params={"op": args.op, "alpha": args.alpha})
    return 0


def _cmd_experiment(args, argv):
    q = _load_normalized(args.form)
    t0 = time.perf_counter()
    T_list = [float(x) for x in args.T_list.split(",")] if args.T_list else []
    rows = experiment_quantitative(q, args.a, args.b, T_list, args.rho,
                                   args.A, args.norm, args.tol)
    payload = [{"T": r[0], "total": r[1], "main": r[2], "R_T": r[3],
                "residual": r[4], "residual_over_T": r[5]} for r in rows]
    _emit(args, argv, payload, form=q, norm_kind=args.norm,
          params={"a": args.a, "b": args.b, "T_list": T_list,
                  "rho": args.rho, "A": args.A},
          wall=time.perf_counter() - t0, csv_rows=rows,
          csv_header=("T", "total", "main", "R_T", "residual",
                      "residual_over_T"))
    return 0


_HANDLERS = {
    "count": _cmd_count,
    "cq": _cmd_cq,
    "solve": _cmd_solve,
    "exceptional": _cmd_exceptional,
    "approx": _cmd_approx,
    "flow": _cmd_flow,
    "energy": _cmd_energy,
    "experiment": _cmd_experiment,
}


def run(argv=None) -> int:
    """Dispatch a command line; returns the exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return _HANDLERS[args.cmd](args, argv)
    except BudgetExceeded as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return 3
    except (OppLabError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
