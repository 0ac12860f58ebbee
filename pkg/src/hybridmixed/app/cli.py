"""Command line entry point: ``hybridmixed <subcommand>``.

Exit status 0 on success, 1 when an iterative solve fails to converge and 2
for invalid input. ``HYBRIDMIXED_NUM_THREADS`` caps BLAS threads.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys

import numpy as np

from ..localcond import MaterialParams
from ..mesh import MeshError, generate_mesh
from ..schur import MultiplierSpace, build_condensed_system, export_triplets
from .config import ConfigError, load_config
from .errors import evaluate_errors
from .manufactured import standard_solution
from .studies import (
    SolverFailure,
    StudyConfig,
    converge_study,
    precond_study,
    solve,
    solver_mesh,
)

NUS = [0.49, 0.499, 0.4999, 0.49999, 0.499999, 0.4999999]
TABLES = {
    "one-level": ([4], ["one-level:edges", "one-level:elements", "one-level:vertex-patches"]),
    "two-level": (
        [4, 8, 16, 32],
        ["two-level::additive", "two-level::sym-multiplicative"],
    ),
    "multilevel": ([4, 8, 16, 32], ["multilevel"]),
}


def _thread_limit():
    n = os.environ.get("HYBRIDMIXED_NUM_THREADS")
    if not n:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def _material(args):
    if getattr(args, "nu", None) is not None:
        return MaterialParams.from_poisson(args.nu, args.mu)
    return MaterialParams(args.mu, args.lam)


def _ints(values):
    """``--res 4 8 16`` and ``--res 4,8,16`` both give [4, 8, 16]."""
    return None if values is None else [int(v) for v in " ".join(values).replace(",", " ").split()]


def _floats(values):
    return None if values is None else [float(v) for v in " ".join(values).replace(",", " ").split()]


def cmd_converge(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = StudyConfig(
            grid=args.grid, resolutions=_ints(args.res), k=args.k, mu=args.mu, lam=args.lam,
            allow_incompatible=args.allow_incompatible,
        )
    rows = converge_study(cfg, out=args.out or cfg.output or sys.stdout)
    if args.out or cfg.output:
        print(f"wrote {len(rows)} rows to {args.out or cfg.output}")
    return 0 if all(r.converged for r in rows) else 1


def cmd_precond(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        res, pcs = TABLES[args.table]
        cfg = StudyConfig(
            study="precond", grid="uniform", resolutions=_ints(args.res) or res, k=args.k,
            mu=args.mu, nus=_floats(args.nu_list) or NUS, preconditioners=args.precond or pcs,
            tol=args.tol, maxit=args.maxit,
            load_lam=None if args.load_lam.lower() == "none" else float(args.load_lam),
        )
    out = args.out or cfg.output
    tables = precond_study(cfg, out=out or sys.stdout, echo=sys.stderr if args.verbose else None)
    if out:
        print(f"wrote iteration table to {out}")
    failed = any(i is None for t in tables for r in t.rows.values() for i in r)
    return 1 if failed else 0


def cmd_mesh_info(args):
    mesh = generate_mesh(args.grid, args.res, path=args.file)
    info = mesh.validate()
    rep = mesh.singularity_report()
    space = MultiplierSpace(mesh, args.k)
    print(f"grid: {args.grid}  nodes: {mesh.n_nodes}  triangles: {mesh.n_triangles}  "
          f"edges: {mesh.n_edges} ({len(mesh.interior_edges)} interior)")
    print(f"euler characteristic: {info['euler']}  h: {mesh.h():.6g}")
    print(f"kappa_min: {rep.kappa_min:.6g}")
    print(f"singular interior vertices: {len(rep.interior_singular_vertices)}")
    if len(rep.interior_singular_vertices):
        print("  " + " ".join(str(v) for v in rep.interior_singular_vertices))
    print(f"nearly singular vertices: {len(rep.nearly_singular_vertices)}")
    print(f"multiplier dofs (k={args.k}): {space.total_dofs}")
    return 0


def cmd_solve(args):
    mat = _material(args)
    if args.file:
        mesh = generate_mesh("file", path=args.file)
    else:
        mesh = solver_mesh(args.grid, args.res)
    exact = standard_solution(mat)
    if args.export:
        _, _, S, b = build_condensed_system(mesh, args.k, mat, exact.load)
        export_triplets(S.matrix, args.export, rhs=b)
        print(f"wrote {args.export} and {args.export}.rhs")
    solver = "pcg" if args.precond else args.solver
    res = solve(mesh, args.k, mat, exact.load, solver, args.precond, args.tol, args.maxit)
    eu, es, ed = evaluate_errors(res.fields, exact)
    print(f"multiplier dofs: {res.n_dofs}  kernel dim: {res.kernel_dim}  solver: {res.method}")
    if res.report is not None:
        r = res.report
        print(f"iterations: {r.iterations}  converged: {r.converged}  "
              f"final residual: {r.residuals[-1]:.3e}  cond est: {r.condition_estimate:.3e}  "
              f"wall: {r.wall_time:.2f}s")
    print(f"|u-u_h|: {eu:.4e}  |sigma-sigma_h|: {es:.4e}  |div(sigma-sigma_h)|: {ed:.4e}")
    return 0 if res.converged else 1


def build_parser():
    p = argparse.ArgumentParser(prog="hybridmixed", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def material_args(q):
        q.add_argument("--mu", type=float, default=0.5)
        q.add_argument("--lam", type=float, default=1.0)

    c = sub.add_parser("converge", help="error table over a sequence of grids")
    c.add_argument("--config")
    c.add_argument("--grid", default="uniform", choices=["uniform", "crisscross", "hct"])
    c.add_argument("--res", nargs="+", default=["4", "8", "16"])
    c.add_argument("--k", type=int, default=2)
    c.add_argument("--allow-incompatible", action="store_true")
    c.add_argument("--out")
    material_args(c)
    c.set_defaults(func=cmd_converge)

    s = sub.add_parser("precond-study", help="PCG iteration counts")
    s.add_argument("--config")
    s.add_argument("--table", choices=sorted(TABLES), default="one-level")
    s.add_argument("--res", nargs="+")
    s.add_argument("--nu-list", nargs="+")
    s.add_argument("--precond", nargs="+")
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--mu", type=float, default=0.5)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--maxit", type=int, default=500)
    s.add_argument("--load-lam", default="1.0")
    s.add_argument("--out")
    s.set_defaults(func=cmd_precond)

    m = sub.add_parser("mesh-info", help="mesh statistics and vertex singularity")
    m.add_argument("--grid", default="uniform", choices=["uniform", "crisscross", "hct", "file"])
    m.add_argument("--res", type=int, default=4)
    m.add_argument("--file")
    m.add_argument("--k", type=int, default=2)
    m.set_defaults(func=cmd_mesh_info)

    v = sub.add_parser("solve", help="solve the standard test problem once")
    v.add_argument("--grid", default="uniform", choices=["uniform", "crisscross", "hct"])
    v.add_argument("--res", type=int, default=8)
    v.add_argument("--file")
    v.add_argument("--k", type=int, default=2)
    v.add_argument("--nu", type=float)
    v.add_argument("--solver", default="auto", choices=["auto", "direct", "pcg"])
    v.add_argument("--precond")
    v.add_argument("--tol", type=float, default=1e-6)
    v.add_argument("--maxit", type=int, default=500)
    v.add_argument("--export")
    material_args(v)
    v.set_defaults(func=cmd_solve)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        with _thread_limit():
            return args.func(args)
    except (ConfigError, MeshError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolverFailure, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
