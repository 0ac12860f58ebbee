"""Closed-form test solutions with derived stress and load."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy

from ..localcond import MaterialParams

_x, _y = sympy.symbols("x y", real=True)


@dataclass
class ManufacturedSolution:
    """Displacement ``u``, stress ``sigma = 2 mu eps(u) + lam tr(eps(u)) I``
    and load ``f = div sigma`` as vectorized callables.

    ``u(x, y)`` returns shape (..., 2); ``sigma`` (..., 2, 2); ``f`` and
    ``div_sigma`` (..., 2). ``load`` adapts ``f`` to the ``(fx, fy)`` tuple
    convention of the assembly routines.
    """

    material: MaterialParams
    u: Callable
    grad_u: Callable
    sigma: Callable
    f: Callable
    expressions: dict

    @property
    def div_sigma(self):
        return self.f

    def load(self, x, y):
        v = self.f(x, y)
        return v[..., 0], v[..., 1]


def _vectorize(expr, shape):
    fn = sympy.lambdify((_x, _y), expr, "numpy")

    def call(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.empty(np.broadcast(x, y).shape + shape)
        vals = fn(x, y)
        for idx in np.ndindex(*shape):
            v = vals
            for i in idx:
                v = v[i]
            out[(...,) + idx] = v
        return out

    return call


def manufactured(u_exprs, material):
    """Build a ManufacturedSolution from two sympy expressions in ``x, y``."""
    u = sympy.Matrix(u_exprs)
    grad = u.jacobian([_x, _y])
    eps = (grad + grad.T) / 2
    sigma = 2 * material.mu * eps + material.lam * eps.trace() * sympy.eye(2)
    f = sympy.Matrix(
        [sympy.diff(sigma[i, 0], _x) + sympy.diff(sigma[i, 1], _y) for i in range(2)]
    )
    exprs = {"u": u, "grad_u": grad, "sigma": sigma, "f": f}
    return ManufacturedSolution(
        material=material,
        u=_vectorize(list(u), (2,)),
        grad_u=_vectorize(grad.tolist(), (2, 2)),
        sigma=_vectorize(sigma.tolist(), (2, 2)),
        f=_vectorize(list(f), (2,)),
        expressions=exprs,
    )


def standard_solution(material=None):
    """``u = (e^{x-y} x y (1-x)(1-y), sin(pi x) sin(pi y))`` on the unit
    square; zero on the boundary. Default material ``mu = 1/2, lam = 1``."""
    if material is None:
        material = MaterialParams(mu=0.5, lam=1.0)
    u1 = sympy.exp(_x - _y) * _x * _y * (1 - _x) * (1 - _y)
    u2 = sympy.sin(sympy.pi * _x) * sympy.sin(sympy.pi * _y)
    return manufactured([u1, u2], material)


def fd_divergence_check(sol, n_points=20, step=1e-5, rng=0):
    """Max relative mismatch between ``f`` and a central-difference
    divergence of ``sigma`` at random interior points."""
    rng = np.random.default_rng(rng)
    p = rng.uniform(0.1, 0.9, size=(n_points, 2))
    x, y = p[:, 0], p[:, 1]
    ds_dx = (sol.sigma(x + step, y) - sol.sigma(x - step, y)) / (2 * step)
    ds_dy = (sol.sigma(x, y + step) - sol.sigma(x, y - step)) / (2 * step)
    div = ds_dx[..., :, 0] + ds_dy[..., :, 1]
    f = sol.f(x, y)
    return float(np.max(np.abs(div - f)) / max(np.max(np.abs(f)), 1e-300))
