"""Drivers for discretization-error and preconditioner studies."""

from __future__ import annotations

import io
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from ..localcond import LocalCondensation, MaterialParams
from ..mesh import (
    attach_parent,
    crisscross_mesh,
    generate_mesh,
    refinement_hierarchy,
    uniform_mesh,
)
from ..schur import MultiplierSpace, assemble_rhs, assemble_schur
from ..solvers import PrecondConfig, build_preconditioner, jacobi, pcg
from .errors import default_error_degree, evaluate_errors, observed_orders
from .manufactured import standard_solution

log = logging.getLogger(__name__)


class SolverFailure(RuntimeError):
    pass


def parse_precond(name):
    """``kind[:block_type[:mode]]``, e.g. ``two-level:coarse-vertex-patches:additive``."""
    parts = name.split(":")
    kind = parts[0]
    if kind in ("two-level", "multilevel"):
        blocks = "coarse-vertex-patches"
    else:
        blocks = "vertex-patches"
    cfg = PrecondConfig(kind=kind, block_type=blocks)
    if len(parts) > 1 and parts[1]:
        cfg.block_type = parts[1]
    if len(parts) > 2 and parts[2]:
        cfg.schwarz_mode = parts[2]
    if len(parts) > 3:
        raise ValueError(f"malformed preconditioner name {name!r}")
    if kind == "multilevel":
        cfg.coarse_solver = "w-cycle"
    return cfg.validate()


def solver_mesh(grid, n):
    """Mesh at ``1/h = n``. Uniform and criss-cross grids at powers of two
    carry their coarser ancestors so that two-level and multilevel
    preconditioners can use them."""
    if n >= 2 and (n & (n - 1)) == 0:
        levels = int(round(math.log2(n))) + 1
        if grid == "uniform":
            return refinement_hierarchy(uniform_mesh(1), levels)[-1]
        if grid == "crisscross":
            mesh = crisscross_mesh(1)
            for j in range(1, levels):
                mesh = attach_parent(crisscross_mesh(2**j), mesh)
            return mesh
    return generate_mesh(grid, n)


@dataclass
class SolveResult:
    fields: object
    multiplier: np.ndarray
    iterations: int
    converged: bool
    method: str
    n_dofs: int
    kernel_dim: int
    report: object = None


def solve(mesh, k, material, f, solver="auto", precond=None, tol=1e-6, maxit=500):
    """Assemble, solve the multiplier system and recover ``(sigma_h, u_h)``.

    ``solver='auto'`` uses a sparse direct factorization when ker S is
    trivial and kernel-projected PCG otherwise.
    """
    cond = LocalCondensation(mesh, k, material)
    space = MultiplierSpace(mesh, k)
    S = assemble_schur(mesh, space, cond)
    load = cond.load(f)
    b = assemble_rhs(mesh, space, cond, load=load)
    Z = S.kernel_basis
    if solver == "auto":
        solver = "pcg" if Z.shape[1] else "direct"
    report = None
    if solver == "direct":
        if Z.shape[1]:
            raise SolverFailure("direct solve requested for a singular system")
        lam = spla.splu(S.matrix.tocsc()).solve(b)
        iters, ok = 0, True
    elif solver == "pcg":
        if precond is None:
            M = jacobi(S)
        else:
            cfg = parse_precond(precond) if isinstance(precond, str) else precond
            M = build_preconditioner(S, space, material, cfg)
        lam, report = pcg(S.matrix, b, M, tol=tol, maxit=maxit, kernel=Z)
        iters, ok = report.iterations, report.converged
    else:
        raise ValueError(f"unknown solver {solver!r}")
    fields = cond.recover(space.gather(lam), load)
    return SolveResult(fields, lam, iters, ok, solver, space.total_dofs, Z.shape[1], report)


# ----------------------------------------------------------------------
# convergence study


@dataclass
class ErrorRow:
    inv_h: int
    err_u: float
    err_sigma: float
    err_div: float
    order_u: float | None = None
    order_sigma: float | None = None
    order_div: float | None = None
    converged: bool = True

    def csv(self):
        def o(v):
            return "" if v is None else f"{v:.2f}"

        flag = "" if self.converged else ",NOT-CONVERGED"
        return (
            f"{self.inv_h},{self.err_u:.4e},{o(self.order_u)},"
            f"{self.err_sigma:.4e},{o(self.order_sigma)},"
            f"{self.err_div:.4e},{o(self.order_div)}{flag}"
        )


ERROR_HEADER = "1/h,err_u,order_u,err_sigma,order_sigma,err_div,order_div"


@dataclass
class StudyConfig:
    study: str = "converge"
    grid: str = "uniform"
    resolutions: list = field(default_factory=lambda: [4, 8, 16])
    k: int = 2
    mu: float = 0.5
    lam: float | None = 1.0
    nus: list = field(default_factory=list)
    preconditioners: list = field(default_factory=list)
    solver: str = "auto"
    tol: float = 1e-6
    singular_tol: float = 1e-12
    maxit: int = 500
    quad_boost: int = 0
    load_lam: float | None = 1.0
    output: str | None = None
    allow_incompatible: bool = False

    def validate(self):
        r = list(self.resolutions)
        if not r or any(b <= a for a, b in zip(r, r[1:])) or r[0] < 1:
            raise ValueError("resolutions must be positive and strictly increasing")
        if self.grid not in ("uniform", "crisscross", "hct", "macro"):
            raise ValueError(f"unknown grid kind {self.grid!r}")
        if self.k not in (0, 1, 2, 3):
            raise ValueError("k must be one of 0, 1, 2, 3")
        if self.k < 2 and self.grid not in ("hct", "macro"):
            msg = f"k={self.k} is only stable on macro-simplex grids"
            if not self.allow_incompatible:
                raise ValueError(msg + " (set allow_incompatible to proceed)")
            log.warning(msg)
        if any(not 0.0 <= nu < 0.5 for nu in self.nus):
            raise ValueError("Poisson ratios must lie in [0, 0.5)")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.study == "precond" and not self.nus:
            raise ValueError("preconditioner study needs a list of Poisson ratios")
        for p in self.preconditioners:
            parse_precond(p)
        return self

    def material(self, nu=None):
        if nu is not None:
            return MaterialParams.from_poisson(nu, self.mu)
        return MaterialParams(self.mu, self.lam)


def converge_study(config, out=None):
    """Error table over ``config.resolutions``; returns the rows and writes
    CSV to ``out`` (a path or text stream) when given."""
    config.validate()
    mat = config.material(config.nus[0] if config.nus else None)
    exact = standard_solution(mat)
    rows = []
    for n in config.resolutions:
        mesh = generate_mesh(config.grid, n)
        t0 = time.perf_counter()
        res = solve(
            mesh, config.k, mat, exact.load, config.solver,
            tol=config.singular_tol, maxit=max(config.maxit, 20000),
        )
        if not res.converged:
            log.error("1/h=%d: solver did not converge", n)
        eu, es, ed = evaluate_errors(
            res.fields, exact, default_error_degree(config.k) + config.quad_boost
        )
        rows.append(ErrorRow(n, eu, es, ed, converged=res.converged))
        log.info(
            "1/h=%d dofs=%d kernel=%d %s iters=%d wall=%.2fs",
            n, res.n_dofs, res.kernel_dim, res.method, res.iterations,
            time.perf_counter() - t0,
        )
    for name in ("u", "sigma", "div"):
        orders = observed_orders([getattr(r, f"err_{name}") for r in rows])
        for r, o in zip(rows, orders):
            setattr(r, f"order_{name}", o)
    text = "\n".join([ERROR_HEADER] + [r.csv() for r in rows]) + "\n"
    _emit(text, out)
    return rows


# ----------------------------------------------------------------------
# preconditioner study


@dataclass
class IterationTable:
    preconditioner: str
    nus: list
    rows: dict  # 1/h -> list of iteration counts (None when not converged)
    dofs: dict

    def csv_lines(self):
        for n, its in self.rows.items():
            cells = ",".join("" if i is None else str(i) for i in its)
            yield f"{self.preconditioner},{n},{self.dofs[n]},{cells}"


def precond_study(config, out=None, echo=None):
    """PCG iteration counts for each preconditioner, ``1/h`` and Poisson
    ratio. The load is the standard solution's ``div sigma`` for Lame
    parameters ``(mu, load_lam)``, held fixed over the ratio sweep
    (``load_lam=None``: derived from each material instead). Wall times go
    to ``echo`` (a text stream) only, so the CSV stays deterministic."""
    config.validate()
    fixed = None
    if config.load_lam is not None:
        fixed = standard_solution(MaterialParams(config.mu, config.load_lam)).load
    tables = []
    for name in config.preconditioners:
        cfg = parse_precond(name)
        table = IterationTable(name, list(config.nus), {}, {})
        for n in config.resolutions:
            mesh = solver_mesh(config.grid, n)
            counts = []
            for nu in config.nus:
                mat = config.material(nu)
                load = fixed or standard_solution(mat).load
                t0 = time.perf_counter()
                res = solve(
                    mesh, config.k, mat, load, "pcg", cfg,
                    tol=config.tol, maxit=config.maxit,
                )
                counts.append(res.iterations if res.converged else None)
                table.dofs[n] = res.n_dofs
                if echo is not None:
                    echo.write(
                        f"{name} 1/h={n} nu={nu}: {res.iterations} iterations, "
                        f"{time.perf_counter() - t0:.2f}s\n"
                    )
            table.rows[n] = counts
        tables.append(table)
    header = "preconditioner,1/h,dofs," + ",".join(f"nu={nu}" for nu in config.nus)
    lines = [header] + [line for t in tables for line in t.csv_lines()]
    _emit("\n".join(lines) + "\n", out)
    return tables


def _emit(text, out):
    if out is None:
        return
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        with open(out, "w") as fh:
            fh.write(text)
    elif isinstance(out, io.TextIOBase) or hasattr(out, "write"):
        out.write(text)
