"""L2 errors of discrete fields against closed-form solutions."""

from __future__ import annotations

import numpy as np

from ..elements import (
    SYM_GENERATORS,
    LagrangeBasis,
    jacobians,
    map_points,
    triangle_quadrature,
)


def default_error_degree(k):
    return 2 * (k + 2) + 6


def stress_divergence(fields, ref_pts):
    """Physical ``div sigma_h`` at reference points, (n_tri, n_pts, 2)."""
    basis = LagrangeBasis(fields.k + 1)
    scalar = basis.dim
    _, _, JiT = jacobians(fields.mesh)
    g = np.einsum("tij,qaj->tqai", JiT, basis.gradients(ref_pts))  # (t, q, a, 2)
    c = fields.stress_coeffs.reshape(len(JiT), scalar, 3)
    # div(phi T)_i = sum_j d_j phi T_ij
    return np.einsum("tqaj,tas,sij->tqi", g, c, SYM_GENERATORS)


def evaluate_errors(fields, exact, quad_degree=None):
    """``(|u - u_h|_0, |sigma - sigma_h|_0, |div sigma - div sigma_h|_0)``."""
    q = triangle_quadrature(quad_degree or default_error_degree(fields.k))
    X = map_points(fields.mesh, q.points)
    x, y = X[..., 0], X[..., 1]
    w = q.weights[None, :] * (2.0 * fields.mesh.area)[:, None]
    du = exact.u(x, y) - fields.displacement_at(q.points)
    ds = exact.sigma(x, y) - fields.stress_at(q.points)
    dd = exact.div_sigma(x, y) - stress_divergence(fields, q.points)
    eu = np.sqrt(np.sum(w * np.sum(du**2, axis=-1)))
    es = np.sqrt(np.sum(w * np.sum(ds**2, axis=(-2, -1))))
    ed = np.sqrt(np.sum(w * np.sum(dd**2, axis=-1)))
    return float(eu), float(es), float(ed)


def observed_orders(errors):
    """``log2(e_{2h} / e_h)`` between successive rows (None on the first)."""
    errors = np.asarray(errors, dtype=float)
    out = [None]
    for i in range(1, len(errors)):
        out.append(np.log2(errors[i - 1] / errors[i]))
    return out
