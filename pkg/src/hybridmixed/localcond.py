"""Element-local saddle solves, static condensation and field recovery."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .elements import (
    DisplacementBasis,
    EdgeLagrangeBasis,
    StressBasis,
    edge_quadrature,
    load_vectors,
    local_matrices,
    map_points,
    triangle_quadrature,
)


@dataclass(frozen=True)
class MaterialParams:
    """Lame parameters ``mu`` (shear modulus) and ``lam``."""

    mu: float
    lam: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("shear modulus mu must be positive")
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative")

    @property
    def nu(self):
        """Poisson ratio."""
        return self.lam / (2.0 * (self.lam + self.mu))

    @classmethod
    def from_poisson(cls, nu, mu=0.5):
        if not 0.0 <= nu < 0.5:
            raise ValueError("Poisson ratio must lie in [0, 0.5)")
        return cls(mu=mu, lam=2.0 * mu * nu / (1.0 - 2.0 * nu))


@dataclass
class FieldSolution:
    """Per-element coefficients of the stress (StressBasis) and the
    displacement (DisplacementBasis)."""

    mesh: object
    k: int
    stress_coeffs: np.ndarray
    displacement_coeffs: np.ndarray

    def stress_at(self, ref_pts):
        """Stress values at reference points of every element,
        shape (n_tri, n_pts, 2, 2)."""
        vals = StressBasis(self.k).values(ref_pts)
        return np.einsum("ti,qiab->tqab", self.stress_coeffs, vals)

    def displacement_at(self, ref_pts):
        vals = DisplacementBasis(self.k).values(ref_pts)
        return np.einsum("ti,qic->tqc", self.displacement_coeffs, vals)


class LocalCondensation:
    """Factorized element saddle problems for one (mesh, k, material).

    For element K with blocks A (compliance mass), B (displacement-divergence)
    and C (trace coupling over the three edges) the saddle matrix
    ``[[A, B^T], [B, 0]]`` is solved once against ``[C^T, 0]`` and ``[0, I]``.
    The results give

    * ``X, Y``: multiplier -> stress / displacement coefficients,
    * ``G, H``: displacement load moments -> stress / displacement,
    * ``S = C X``: the element Schur block.

    The constant field ``I`` spans the kernel of the incompressible limit of
    the saddle matrix. It is split off: stresses are written ``c I + W z``
    with ``W`` a basis of ``{tau : int tr tau = 0}``, which is orthogonal to
    ``I`` in every pairing ``a (dev, dev) + b (tr, tr)``. ``c`` then solves a
    scalar equation and the ``z`` saddle stays well conditioned as
    ``lam -> inf``.

    Local multiplier vectors are ordered ``(local edge, node, component)``
    with each edge parametrized in its global orientation.
    """

    def __init__(self, mesh, k, material, quad_degree=None):
        self.mesh = mesh
        self.k = k
        self.material = material
        self.em = local_matrices(mesh, k, quad_degree)
        em = self.em
        self.ns = em.stress.dim
        self.nu = em.disp.dim
        self.ne = em.trace.dim  # per edge
        self.nl = 3 * self.ne
        self.C = em.C.reshape(mesh.n_triangles, self.nl, self.ns)
        self.parts = em.compliance_parts(material)
        self.A = em.compliance_matrix(material)
        self._identity_split()
        self.X, self.Y, self.G, self.H = self._solve_saddle(self.parts)
        self.S = np.einsum("tmi,tin->tmn", self.C, self.X)
        self.S = 0.5 * (self.S + self.S.transpose(0, 2, 1))
        self._nopara = None

    def _identity_split(self):
        q = triangle_quadrature(2 * (self.k + 1))
        phi = self.em.stress.scalar.values(q.points)
        ones = np.linalg.lstsq(phi, np.ones(len(q.points)), rcond=None)[0]
        self.e = np.kron(ones, [1.0, 1.0, 0.0])
        # int tr tau is the same functional on every element up to scale
        m = self.em.mass_trace[0] @ self.e
        self.W = sla.null_space(m[None, :])

    def _solve_saddle(self, parts):
        """Solve against ``[C^T, 0]`` and ``[0, I]`` with ``A = sum c M``
        over ``parts``."""
        nt, nu, nl = self.mesh.n_triangles, self.nu, self.nl
        W, e = self.W, self.e
        nw = W.shape[1]
        Aee = sum(c * np.einsum("i,tij,j->t", e, M, e) for c, M in parts)
        A = sum(c * M for c, M in parts)
        BW = self.em.B @ W
        CW = self.C @ W
        K = np.zeros((nt, nw + nu, nw + nu))
        K[:, :nw, :nw] = W.T @ A @ W
        K[:, :nw, nw:] = BW.transpose(0, 2, 1)
        K[:, nw:, :nw] = BW
        rhs = np.zeros((nt, nw + nu, nl + nu))
        rhs[:, :nw, :nl] = CW.transpose(0, 2, 1)
        rhs[:, nw:, nl:] = np.eye(nu)
        msg = (
            "local saddle problem is singular: degenerate element or "
            "unsupported k/grid combination"
        )
        if not np.all(Aee > 0):
            raise np.linalg.LinAlgError(msg)
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(msg) from exc
        ce = (self.C @ e) / Aee[:, None]
        if parts is self.parts:
            # split coordinates of the multiplier-driven stress, kept for
            # accurate energies
            self._Aee, self._ce, self._Z = Aee, ce, sol[:, :nw, :nl]
        X = W @ sol[:, :nw, :nl] + e[None, :, None] * ce[:, None, :]
        G = W @ sol[:, :nw, nl:]
        return X, sol[:, nw:, :nl], G, sol[:, nw:, nl:]

    def lambda_energy(self, lam_local):
        """``(A sigma_lambda, sigma_lambda)_K`` per element for local data
        (n_tri, nl). ``sigma_lambda = c I + W z`` is paired in those
        coordinates; the cross terms vanish."""
        c = np.einsum("tn,tn->t", self._ce, lam_local)
        z = np.einsum("tin,tn->ti", self._Z, lam_local)
        zw = np.einsum("ij,tj->ti", self.W, z)
        return self._Aee * c**2 + self.compliance_form(zw)

    def compliance_form(self, s, t=None):
        """``(A sigma, sigma)`` summed term by term; batched over elements
        when ``t`` is None."""
        if t is None:
            return sum(c * np.einsum("ti,tij,tj->t", s, M, s) for c, M in self.parts)
        return sum(c * float(s @ M[t] @ s) for c, M in self.parts)

    # ------------------------------------------------------------------
    # single-element operations

    def solve_local_lambda(self, t, lam):
        """(sigma_lambda, u_lambda) coefficients for local multiplier data."""
        lam = np.asarray(lam, dtype=float).reshape(self.nl)
        return self.X[t] @ lam, self.Y[t] @ lam

    def solve_local_f(self, t, f=None, load=None):
        """(sigma_f, u_f) for a load function ``f`` (or precomputed load
        moments ``load`` = (f, v_p)_K)."""
        if load is None:
            load = self.load(f)[t]
        load = np.asarray(load, dtype=float)
        return self.G[t] @ load, self.H[t] @ load

    def local_schur_apply(self, t, lam):
        return self.S[t] @ np.asarray(lam, dtype=float).reshape(self.nl)

    def energy_norm_sq(self, t, lam):
        """(A sigma_lambda, sigma_lambda)_K computed from the stress field."""
        lam = np.asarray(lam, dtype=float).reshape(1, self.nl)
        full = np.zeros((self.mesh.n_triangles, self.nl))
        full[t] = lam
        return float(self.lambda_energy(full)[t])

    def seminorm_star(self, t, lam):
        """|K|^{-1/2} |int_{dK} lambda . nu ds|."""
        lam = np.asarray(lam, dtype=float).reshape(self.nl)
        return abs(self.normal_flux_weights()[t] @ lam) / math.sqrt(self.mesh.area[t])

    def seminorm_h(self, t, lam):
        """L2 norm of the stress of the parameter-free local problem, where
        the compliance pairing is replaced by the plain L2 pairing."""
        X = self._nopara_X()
        s = X[t] @ np.asarray(lam, dtype=float).reshape(self.nl)
        return math.sqrt(max(float(s @ self.em.mass_full[t] @ s), 0.0))

    def _nopara_X(self):
        if self._nopara is None:
            self._nopara = self._solve_saddle([(1.0, self.em.mass_full)])[0]
        return self._nopara

    def normal_flux_weights(self):
        """w[t] with ``w[t] @ lam = int_{dK} lam . nu ds``."""
        k = self.k
        eq = edge_quadrature(k + 1)
        phi = self.em.trace.scalar.values(eq.points)
        ints = eq.weights @ phi  # (nj,)
        mesh = self.mesh
        L = mesh.edge_length[mesh.edge_of_triangle]  # (nt, 3)
        nu = mesh.triangle_normals  # (nt, 3, 2)
        w = L[:, :, None, None] * ints[None, None, :, None] * nu[:, :, None, :]
        return w.reshape(mesh.n_triangles, self.nl)

    # ------------------------------------------------------------------
    # batched operations

    def load(self, f, quad_degree=None):
        return load_vectors(self.mesh, self.k, f, quad_degree or self.em.quad_degree)

    def recover(self, lam_local, load=None):
        """Fields from local multiplier data ``lam_local`` (n_tri, nl) and
        load moments (n_tri, nu)."""
        s = np.einsum("tin,tn->ti", self.X, lam_local)
        u = np.einsum("tin,tn->ti", self.Y, lam_local)
        if load is not None:
            s += np.einsum("tip,tp->ti", self.G, load)
            u += np.einsum("tip,tp->ti", self.H, load)
        return FieldSolution(self.mesh, self.k, s, u)


def rigid_motion_trace(mesh, t, k, c=(0.0, 0.0), omega=0.0):
    """Local multiplier vector of the trace of the rigid motion
    ``c + omega * (-y, x)`` on the edges of triangle ``t``."""
    return polynomial_trace(
        mesh, t, k, lambda x, y: (c[0] - omega * y + 0 * x, c[1] + omega * x + 0 * y)
    )


def polynomial_trace(mesh, t, k, w):
    """Local multiplier vector interpolating ``w(x, y)`` at the trace Lagrange
    nodes of the three edges of triangle ``t`` (exact for polynomial traces of
    degree <= k + 1)."""
    nodes = EdgeLagrangeBasis(k + 1).nodes
    out = []
    for e in mesh.edge_of_triangle[t]:
        a, b = mesh.nodes[mesh.edges[e]]
        pts = a + np.outer(nodes, b - a)
        wx, wy = w(pts[:, 0], pts[:, 1])
        out.append(np.column_stack(np.broadcast_arrays(wx, wy)).ravel())
    return np.concatenate(out)


def l2_projection_coeffs(mesh, k, fun, kind, quad_degree=None):
    """Element-wise L2 projection of a closed-form field onto the stress
    (``kind='stress'``, ``fun -> (n_tri, n_pts, 2, 2)``) or displacement space
    (``fun -> (n_tri, n_pts, 2)``); ``fun`` receives physical points."""
    basis = StressBasis(k) if kind == "stress" else DisplacementBasis(k)
    q = triangle_quadrature(quad_degree or 2 * (k + 1) + 6)
    X = map_points(mesh, q.points)
    vals = basis.values(q.points)
    fv = fun(X)
    if kind == "stress":
        M = np.einsum("q,qiab,qjab->ij", q.weights, vals, vals)
        rhs = np.einsum("q,qiab,tqab->ti", q.weights, vals, fv)
    else:
        M = np.einsum("q,qia,qja->ij", q.weights, vals, vals)
        rhs = np.einsum("q,qia,tqa->ti", q.weights, vals, fv)
    return np.linalg.solve(M, rhs.T).T
