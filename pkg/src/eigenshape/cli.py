"""``eigenshape`` command line: run scenario suites and one-off solves on PGM masks."""

from __future__ import annotations

import argparse
import logging
import sys

from . import io
from .errors import ConfigError, ConvergenceError
from .metrics import gamma_distance
from .scenarios import resolve_seed, run_suite
from .solver import SolverConfig, eigensolve, solve_torsion


def _cfg(args) -> SolverConfig:
    return SolverConfig(tolerance=args.tol, seed=resolve_seed(0, args.seed))


def cmd_run(args) -> int:
    summary = run_suite(args.config, args.out, jobs=args.jobs, seed=args.seed)
    print(summary.table)
    print(f"summary written to {summary.summary_csv}")
    return 0 if summary.passed else 1


def cmd_solve(args) -> int:
    mask = io.read_mask(args.mask)
    res = eigensolve(mask, args.k, _cfg(args))
    print("index,eigenvalue,residual")
    for j, (lam, r) in enumerate(zip(res.eigenvalues, res.residuals), start=1):
        print(f"{j},{float(lam)!r},{float(r)!r}")
    if args.out:
        io.write_eigen_result(args.out, res)
    return 0


def cmd_torsion(args) -> int:
    mask = io.read_mask(args.mask)
    w = solve_torsion(mask, _cfg(args))
    print(f"energy={float(-w.integral())!r} max={float(w.values.max())!r} cells={mask.count}")
    if args.out:
        io.write_field(args.out, w, csv_path=args.out + ".csv")
    return 0


def cmd_gamma(args) -> int:
    a = io.read_mask(args.mask_a)
    b = io.read_mask(args.mask_b)
    rep = gamma_distance(a, b, _cfg(args))
    print(f"gamma_distance={float(rep.value)!r} h={float(rep.h)!r} residuals={rep.residuals[0]:.3e},{rep.residuals[1]:.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eigenshape", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run every scenario of a JSON suite")
    r.add_argument("config")
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--jobs", type=int, default=1)
    r.set_defaults(func=cmd_run)

    for name, func, helptext in (
        ("solve", cmd_solve, "leading Dirichlet eigenvalues of a mask"),
        ("torsion", cmd_torsion, "torsion function and energy of a mask"),
    ):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--mask", required=True)
        if name == "solve":
            s.add_argument("--k", type=int, default=1)
        s.add_argument("--out", default=None)
        s.add_argument("--tol", type=float, default=1e-8)
        s.add_argument("--seed", type=int, default=None)
        s.set_defaults(func=func)

    g = sub.add_parser("gamma", help="gamma distance between two masks on one grid")
    g.add_argument("--mask-a", required=True)
    g.add_argument("--mask-b", required=True)
    g.add_argument("--tol", type=float, default=1e-8)
    g.add_argument("--seed", type=int, default=None)
    g.set_defaults(func=cmd_gamma)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, ConvergenceError, OSError, ValueError) as exc:
        print(f"eigenshape: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
