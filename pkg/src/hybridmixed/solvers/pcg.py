"""Preconditioned conjugate gradients for consistent SPSD systems."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np


class PreconditionerBreakdown(RuntimeError):
    """Raised when <M r, r> <= 0, i.e. the preconditioner is not SPD."""


@dataclass
class SolveReport:
    iterations: int = 0
    residuals: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0
    ritz_min: float = float("nan")
    ritz_max: float = float("nan")
    nonmonotone_steps: int = 0

    @property
    def condition_estimate(self):
        return self.ritz_max / self.ritz_min if self.ritz_min > 0 else float("inf")

    def csv_row(self):
        return (
            f"{self.iterations},{int(self.converged)},"
            f"{self.residuals[-1] if self.residuals else 0.0:.4e},"
            f"{self.condition_estimate:.4e}"
        )


def _as_apply(op):
    if op is None:
        return lambda r: r.copy()
    if callable(op) and not hasattr(op, "matvec"):
        return op
    return op.matvec if hasattr(op, "matvec") else (lambda x: op @ x)


def pcg(S, b, M=None, tol=1e-6, maxit=500, kernel=None, x0=None):
    """Solve ``S x = b`` by PCG with relative Euclidean residual stopping.

    ``kernel`` is an orthonormal basis (columns) of ker S: the right-hand side
    and every preconditioned residual are projected onto its orthogonal
    complement, so the iterates stay in range(S). Extremal Ritz values of the
    preconditioned operator are recovered from the CG coefficients.
    """
    t0 = time.perf_counter()
    apply_S = _as_apply(S)
    apply_M = _as_apply(M)
    b = np.asarray(b, dtype=float)
    Z = None if kernel is None or kernel.shape[1] == 0 else kernel

    def proj(v):
        return v if Z is None else v - Z @ (Z.T @ v)

    b = proj(b)
    x = np.zeros_like(b) if x0 is None else proj(np.asarray(x0, dtype=float).copy())
    report = SolveReport()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        report.converged = True
        report.residuals = [0.0]
        report.wall_time = time.perf_counter() - t0
        return x, report

    r = b - apply_S(x) if x0 is not None else b.copy()
    rel = np.linalg.norm(r) / bnorm
    report.residuals.append(rel)
    z = proj(apply_M(r))
    rz = float(r @ z)
    p = z.copy()
    alphas, betas = [], []
    it = 0
    while rel > tol and it < maxit:
        if rz <= 0.0:
            raise PreconditionerBreakdown(f"<Mr, r> = {rz:.3e} at iteration {it}")
        q = apply_S(p)
        pq = float(p @ q)
        if pq <= 0.0:
            break
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        it += 1
        new = np.linalg.norm(r) / bnorm
        if new > 10.0 * rel:
            report.nonmonotone_steps += 1
        rel = new
        report.residuals.append(rel)
        if rel <= tol:
            alphas.append(alpha)
            break
        z = proj(apply_M(r))
        rz_new = float(r @ z)
        beta = rz_new / rz
        alphas.append(alpha)
        betas.append(beta)
        rz = rz_new
        p = z + beta * p

    report.iterations = it
    report.converged = rel <= tol
    report.wall_time = time.perf_counter() - t0
    if alphas:
        ev = _lanczos_ritz(alphas, betas)
        report.ritz_min, report.ritz_max = float(ev.min()), float(ev.max())
    return proj(x), report


def _lanczos_ritz(alphas, betas):
    n = len(alphas)
    d = np.empty(n)
    e = np.empty(max(n - 1, 0))
    d[0] = 1.0 / alphas[0]
    for i in range(1, n):
        d[i] = 1.0 / alphas[i] + betas[i - 1] / alphas[i - 1]
        e[i - 1] = np.sqrt(max(betas[i - 1], 0.0)) / alphas[i - 1]
    T = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    return np.linalg.eigvalsh(T)


def jacobi(S):
    """Diagonal preconditioner of an assembled operator."""
    A = S.matrix if hasattr(S, "matrix") else S
    d = A.diagonal().copy()
    d[d == 0] = 1.0
    inv = 1.0 / d
    return lambda r: inv * r
