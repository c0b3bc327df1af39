"""``multisym`` command line: legendre, evolve, verify, perturb, suite.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage
or configuration errors.  Tables go to CSV (with a header row), configs and
reports to JSON with sorted keys.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class UsageError(Exception):
    pass


def _threads() -> int:
    raw = os.environ.get("MULTISYM_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"MULTISYM_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise UsageError("MULTISYM_THREADS must be >= 1")
    return n


def _cap_threads(n: int):
    # BLAS pools read these once, at import time, so this runs before numpy loads
    for var in _THREAD_VARS:
        os.environ.setdefault(var, str(n))


# ---------------------------------------------------------------------------
# output helpers


def _dump_json(obj, path=None):
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _write_csv(rows, header, path=None):
    if path is None:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _sidecar(path) -> Path:
    return Path(path).with_suffix(".json")


def _load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_legendre(args) -> int:
    from .checks import LEGENDRE_PROBLEMS, legendre_table

    problems = list(LEGENDRE_PROBLEMS) if args.problem == "all" else [args.problem]
    rows = [row for name in problems for row in legendre_table(name, args.points, args.seed)]
    header = list(rows[0]) if rows else ["problem"]
    _write_csv([[row[h] for h in header] for row in rows], header, args.out)
    worst = max((row["abs_error"] for row in rows), default=0.0)
    ok = worst <= args.tol
    print(f"legendre: max abs error {worst:.3e} (tol {args.tol:g}) {'PASS' if ok else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def _evolve_params(args) -> dict:
    return {"nx": args.nx, "nt": args.nt, "dx": args.dx, "dt": args.dt, "m": args.m,
            "lambda": args.lam, "init": args.init, "amplitude": args.amplitude}


def cmd_evolve(args) -> int:
    from . import dynamics

    params = _evolve_params(args)
    lat = dynamics.Lattice1p1(args.nt, args.nx, args.dt, args.dx)
    phi0, phidot0 = dynamics.initial_data(args.init, lat, args.m, args.amplitude)
    phi = dynamics.evolve_scalar(phi0, phidot0, args.m, args.lam, lat)
    curve = dynamics.lift_to_curve(phi, args.m, args.lam, lat)
    cols = range(lat.Nx)
    header = (["t"] + [f"phi_{j}" for j in cols] + [f"p0_{j}" for j in cols]
              + [f"p1_{j}" for j in cols] + [f"e_{j}" for j in cols])
    rows = [[float(lat.t[n])] + [float(v) for v in curve.phi[n]] + [float(v) for v in curve.p[n, :, 0]]
            + [float(v) for v in curve.p[n, :, 1]] + [float(v) for v in curve.e[n]] for n in range(lat.Nt)]
    _write_csv(rows, header, args.out)
    meta = {"command": "evolve", "config": params, "lattice": lat.to_dict()}
    if args.out is not None:
        _dump_json(meta, _sidecar(args.out))
    return EXIT_OK


def cmd_verify(args) -> int:
    from .checks import run_check

    config = _load_json(args.config) if args.config else None
    try:
        report = run_check(args.check, config)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc))
    _dump_json(report, args.out)
    if args.out is not None:
        print(f"verify {args.check}: {'PASS' if report['pass'] else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if report["pass"] else EXIT_FAIL


def lambda_grid(lo: float, hi: float, n: int):
    import numpy as np

    if n < 1 or lo < 0 or hi < lo:
        raise UsageError("need 0 <= lambda-min <= lambda-max and n-lambda >= 1")
    if n == 1 or lo == hi:
        return (float(lo),)
    grid = np.geomspace(lo, hi, n) if lo > 0 else np.linspace(lo, hi, n)
    return tuple(float(v) for v in grid)


def _perturb_params(args) -> dict:
    return {"lambda_min": args.lambda_min, "lambda_max": args.lambda_max, "n_lambda": args.n_lambda,
            "nx": args.nx, "nt": args.nt, "dx": args.dx, "dt": args.dt, "m": args.m, "phi1": args.phi1,
            "t0": args.t0, "t1": args.t1, "amplitude": args.amplitude, "init": args.init,
            "floor": args.floor}


def cmd_perturb(args) -> int:
    from . import perturbation

    lams = lambda_grid(args.lambda_min, args.lambda_max, args.n_lambda)
    if args.phi1 != "gaussian" and not args.phi1.startswith("plane"):
        raise UsageError(f"--phi1 must be plane:K or gaussian, got {args.phi1!r}")
    cfg = perturbation.ScalingConfig(Nx=args.nx, Nt=args.nt, dx=args.dx, dt=args.dt, m=args.m,
                                     lambdas=lams, amplitude=args.amplitude, phi1=args.phi1, init=args.init)
    if args.t0 is not None or args.t1 is not None:
        t0, t1 = cfg.slab()
        cfg = cfg.with_slab_times(t0 if args.t0 is None else args.t0, t1 if args.t1 is None else args.t1)
    out = perturbation.lambda_scaling_study(cfg, workers=args.threads)
    s1, s2 = out["slope1"], out["slope2"]
    if s1 is None or s2 is None:
        # no slope to fit: fall back to conservation at the lambda = 0 points
        zero = [abs(r["R1"]) for r in out["rows"] if r["lambda"] == 0.0]
        ok = bool(zero) and max(zero) <= args.floor
        checks = {"conservation": max(zero) if zero else None}
    else:
        ok = abs(s1 - 1.0) <= 0.1 and abs(s2 - 2.0) <= 0.2
        checks = {}
    header = ["lambda", "R1", "R2", "volume", "slope1", "slope2"]
    rows = [[r["lambda"], r["R1"], r["R2"], r["volume"], "" if s1 is None else s1, "" if s2 is None else s2]
            for r in out["rows"]]
    _write_csv(rows, header, args.out)
    verdict = {"command": "perturb", "config": _perturb_params(args), "scaling": cfg.to_dict(),
               "slope1": s1, "slope2": s2, "pass": bool(ok), **checks}
    if args.out is not None:
        _dump_json(verdict, _sidecar(args.out))
    print(json.dumps({"slope1": s1, "slope2": s2, "pass": bool(ok), **checks}, sort_keys=True), file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_suite(args) -> int:
    from .acceptance import run_all

    only = None
    if args.only:
        try:
            only = {int(v) for v in args.only.split(",")}
        except ValueError:
            raise UsageError("--only takes a comma-separated list of criterion numbers")
    results = run_all(quick=args.quick, seed=args.seed, only=only)
    for r in results:
        print(r.line())
    passed = all(r.passed for r in results)
    report = {"quick": args.quick, "seed": args.seed, "passed": passed,
              "criteria": [r.to_dict() for r in results]}
    if args.out is not None:
        _dump_json(report, args.out)
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multisym", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("legendre", help="Newton Lepage Hamiltonians vs closed forms (CSV)")
    p.add_argument("--problem", choices=["trivial", "harmonic", "maxwell", "all"], default="all")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", help="CSV path (stdout when omitted)")
    p.set_defaults(func=cmd_legendre)

    p = sub.add_parser("evolve", help="lattice phi^3 evolution; phi, p, e per time slice (CSV + JSON sidecar)")
    p.add_argument("--config", help="JSON sidecar of an earlier run; flags override it")
    p.add_argument("--nx", type=int, default=64)
    p.add_argument("--nt", type=int, default=128)
    p.add_argument("--dx", type=float, default=0.125)
    p.add_argument("--dt", type=float, default=0.0625)
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--init", default="gaussian", help="plane-wave, gaussian or noise:SEED")
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--out", help="CSV path; the sidecar gets the same stem with .json")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("verify", help="run one verification check (JSON report)")
    p.add_argument("--check", required=True, choices=["flow", "dynrel", "pairwise", "bracket", "observable"])
    p.add_argument("--config", help="JSON object of VerifyConfig fields")
    p.add_argument("--out", help="report path (stdout when omitted)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("perturb", help="lambda scaling of R1 and R2 (CSV + JSON verdict)")
    p.add_argument("--config", help="JSON verdict of an earlier run; flags override it")
    p.add_argument("--lambda-min", type=float, default=1e-3)
    p.add_argument("--lambda-max", type=float, default=1e-1)
    p.add_argument("--n-lambda", type=int, default=8)
    p.add_argument("--nx", type=int, default=64)
    p.add_argument("--nt", type=int, default=128)
    p.add_argument("--dx", type=float, default=0.125)
    p.add_argument("--dt", type=float, default=0.0625)
    p.add_argument("--m", type=float, default=1.0)
    p.add_argument("--phi1", default="plane:1", help="plane:K or gaussian")
    p.add_argument("--t0", type=float, help="lower slab time (default between layers 4 and 5)")
    p.add_argument("--t1", type=float, help="upper slab time (default between layers 60 and 61)")
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--init", default="gaussian")
    p.add_argument("--floor", type=float, default=1e-10, help="|R1| bound when no slope can be fitted")
    p.add_argument("--out", help="CSV path; the verdict goes to the same stem with .json")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("suite", help="all acceptance criteria (JSON report)")
    p.add_argument("--quick", action="store_true", help="reduced grids")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.add_argument("--out", help="report path")
    p.set_defaults(func=cmd_suite)
    return parser


_CONFIG_COMMANDS = {"evolve", "perturb"}


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if args.command in _CONFIG_COMMANDS and getattr(args, "config", None):
        saved = _load_json(args.config).get("config", {})
        sub = parser._subparsers._group_actions[0].choices[args.command]
        dests = {a.dest for a in sub._actions}
        renamed = {("lam" if k == "lambda" else k): v for k, v in saved.items()}
        unknown = set(renamed) - dests
        if unknown:
            raise UsageError(f"unknown keys in {args.config}: {sorted(unknown)}")
        sub.set_defaults(**renamed)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        threads = _threads()
        _cap_threads(threads)
        args = _parse(parser, argv)
        args.threads = threads
        from .dynamics import CFLViolation

        try:
            return args.func(args)
        except (CFLViolation, ValueError) as exc:
            # bad grids, presets or slab times
            raise UsageError(str(exc))
    except SystemExit as exc:
        # argparse reports usage errors (and --help) this way
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"multisym: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
