"""Reference-element machinery: quadrature, Lagrange bases, and the batched
local matrices of the stress/displacement/trace spaces and the P2 primal
elasticity space.

All element arrays are batched over the triangles of a mesh (leading axis).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])

# symmetric-matrix generators T11, T22, T12 = (e1 e2^T + e2 e1^T) / 2
SYM_GENERATORS = np.array(
    [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]], [[0.0, 0.5], [0.5, 0.0]]]
)
SUPPORTED_K = (0, 1, 2, 3)


# ----------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int


@lru_cache(maxsize=None)
def triangle_quadrature(degree):
    """Collapsed (Duffy) Gauss rule on the reference triangle, exact for
    polynomials of total degree ``degree``. Weights sum to 1/2."""
    n = max(1, (degree + 2) // 2)
    xg, wg = np.polynomial.legendre.leggauss(n)
    xj, wj = roots_jacobi(n, 1.0, 0.0)
    xi = 0.5 * (xg + 1.0)
    wi = 0.5 * wg
    eta = 0.5 * (xj + 1.0)
    we = 0.25 * wj  # includes the (1 - eta) Jacobian
    X = np.outer(1.0 - eta, xi)
    Y = np.repeat(eta[:, None], n, axis=1)
    W = np.outer(we, wi)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return QuadratureRule(pts, W.ravel(), degree)


@lru_cache(maxsize=None)
def edge_quadrature(degree):
    """Gauss-Legendre rule on [0, 1]; weights sum to 1."""
    n = max(1, (degree + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w, degree)


# ----------------------------------------------------------------------
# Lagrange bases


def _monomials(p):
    return [(a, s - a) for s in range(p + 1) for a in range(s, -1, -1)]


class LagrangeBasis:
    """Nodal Lagrange basis of P_p on the reference triangle.

    Nodes are the equispaced lattice ``(i/p, j/p)``; for ``p = 0`` the single
    node is the centroid.
    """

    def __init__(self, p):
        self.degree = p
        if p == 0:
            self.nodes = np.array([[1.0 / 3.0, 1.0 / 3.0]])
        else:
            self.nodes = np.array(
                [[i / p, j / p] for j in range(p + 1) for i in range(p + 1 - j)]
            )
        self.exps = _monomials(p)
        V = self._vander(self.nodes)
        self.coeffs = np.linalg.inv(V)

    @property
    def dim(self):
        return len(self.nodes)

    def _vander(self, pts):
        x, y = pts[:, 0], pts[:, 1]
        return np.column_stack([x**a * y**b for a, b in self.exps])

    def values(self, pts):
        pts = np.atleast_2d(pts)
        return self._vander(pts) @ self.coeffs

    def gradients(self, pts):
        """Array of shape (n_pts, dim, 2)."""
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        dx = np.column_stack(
            [a * x ** max(a - 1, 0) * y**b if a else 0 * x for a, b in self.exps]
        )
        dy = np.column_stack(
            [b * x**a * y ** max(b - 1, 0) if b else 0 * x for a, b in self.exps]
        )
        return np.stack([dx @ self.coeffs, dy @ self.coeffs], axis=-1)

    def vertex_node(self, i):
        """Index of the node sitting at reference vertex ``i`` (p >= 1)."""
        d = np.linalg.norm(self.nodes - REF_VERTICES[i], axis=1)
        return int(np.argmin(d))


class EdgeLagrangeBasis:
    """Nodal Lagrange basis of P_p on [0, 1] with nodes ``j / p``."""

    def __init__(self, p):
        self.degree = p
        self.nodes = np.array([0.5]) if p == 0 else np.linspace(0.0, 1.0, p + 1)
        V = np.vander(self.nodes, p + 1, increasing=True)
        self.coeffs = np.linalg.inv(V)

    @property
    def dim(self):
        return len(self.nodes)

    def values(self, t):
        t = np.atleast_1d(t)
        return np.vander(t, self.degree + 1, increasing=True) @ self.coeffs

    def mass(self):
        q = edge_quadrature(2 * self.degree + 2)
        v = self.values(q.points)
        return (v * q.weights[:, None]).T @ v


# ----------------------------------------------------------------------
# the discrete spaces on one element


class StressBasis:
    """P_{k+1}(K; S) as scalar Lagrange functions times T11, T22, T12.
    Basis index ``3 * a + s`` (node ``a``, generator ``s``)."""

    def __init__(self, k):
        self.k = k
        self.scalar = LagrangeBasis(k + 1)
        self.dim = 3 * self.scalar.dim

    def values(self, pts):
        """(n_pts, dim, 2, 2) symmetric matrices."""
        phi = self.scalar.values(pts)
        v = phi[:, :, None, None, None] * SYM_GENERATORS[None, None]
        return v.reshape(len(phi), self.dim, 2, 2)


class DisplacementBasis:
    """P_k(K; R^2), basis index ``2 * a + c``."""

    def __init__(self, k):
        self.k = k
        self.scalar = LagrangeBasis(k)
        self.dim = 2 * self.scalar.dim

    def values(self, pts):
        phi = self.scalar.values(pts)
        v = phi[:, :, None, None] * np.eye(2)[None, None]
        return v.reshape(len(phi), self.dim, 2)


class TraceBasis:
    """P_{k+1}(F; R^2) on an edge, basis index ``2 * j + c``; the edge is
    parametrized from its lower to its higher global vertex."""

    def __init__(self, k):
        self.k = k
        self.scalar = EdgeLagrangeBasis(k + 1)
        self.dim = 2 * self.scalar.dim

    def values(self, t):
        phi = self.scalar.values(t)
        v = phi[:, :, None, None] * np.eye(2)[None, None]
        return v.reshape(len(phi), self.dim, 2)


def check_k(k):
    if k not in SUPPORTED_K:
        raise ValueError(f"polynomial degree k={k} not supported (use 0..3)")


# ----------------------------------------------------------------------
# geometry helpers


def jacobians(mesh):
    """Affine map x = x0 + J xhat per triangle: returns (x0, J, Jinv_T)."""
    p = mesh.nodes[mesh.triangles]
    x0 = p[:, 0]
    J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    Jinv_T = np.linalg.inv(J).transpose(0, 2, 1)
    return x0, J, Jinv_T


def map_points(mesh, ref_pts):
    """Physical images of reference points, shape (n_tri, n_pts, 2)."""
    x0, J, _ = jacobians(mesh)
    return x0[:, None, :] + np.einsum("tij,qj->tqi", J, ref_pts)


def edge_reference_points(t, local_edge, forward):
    """Reference coordinates of edge parameters ``t`` on ``local_edge``.
    ``forward`` means the counterclockwise direction of the local edge agrees
    with the global lower-to-higher orientation."""
    a, b = LOCAL_EDGES[local_edge]
    if not forward:
        a, b = b, a
    return REF_VERTICES[a] + np.outer(t, REF_VERTICES[b] - REF_VERTICES[a])


# ----------------------------------------------------------------------
# compliance


def compliance_coefficients(mu, lam, n=2):
    """A tau = a_dev * dev(tau) + a_vol * tr(tau) I.

    The split avoids the cancellation of the equivalent form
    ``tau / (2 mu) - lam / (2 mu (2 mu + n lam)) tr(tau) I`` for large lam.
    """
    return 1.0 / (2.0 * mu), 1.0 / (n * (2.0 * mu + n * lam))


def apply_compliance(tau, material):
    """Compliance tensor applied to a symmetric 2x2 matrix (or a stack)."""
    tau = np.asarray(tau, dtype=float)
    a_dev, a_vol = compliance_coefficients(material.mu, material.lam)
    tr = np.trace(tau, axis1=-2, axis2=-1)[..., None, None] * np.eye(2)
    return a_dev * (tau - 0.5 * tr) + a_vol * tr


# ----------------------------------------------------------------------
# batched local matrices


@dataclass
class ElementMatrices:
    """Material-independent local blocks for every triangle of a mesh.

    ``mass_full[t, i, j] = (tau_i : tau_j)_K``;
    ``mass_trace[t, i, j] = (tr tau_i, tr tau_j)_K``;
    ``mass_dev[t, i, j] = (dev tau_i : dev tau_j)_K``, built from exact
    generator products so that it annihilates the identity field exactly;
    ``B[t, p, i] = (v_p, div tau_i)_K``;
    ``C[t, l, m, i] = <mu_m, tau_i nu>_{e_l}`` with the element's outward
    normal and the trace basis in global edge orientation;
    ``MV[t]`` is the displacement mass matrix.
    """

    k: int
    stress: StressBasis
    disp: DisplacementBasis
    trace: TraceBasis
    mass_full: np.ndarray
    mass_trace: np.ndarray
    mass_dev: np.ndarray
    B: np.ndarray
    C: np.ndarray
    MV: np.ndarray
    quad_degree: int

    def compliance_parts(self, material):
        """``[(a_dev, mass_dev), (a_vol, mass_trace)]`` summing to A."""
        a_dev, a_vol = compliance_coefficients(material.mu, material.lam)
        return [(a_dev, self.mass_dev), (a_vol, self.mass_trace)]

    def compliance_matrix(self, material):
        return sum(c * M for c, M in self.compliance_parts(material))


def local_matrices(mesh, k, quad_degree=None):
    check_k(k)
    if quad_degree is None:
        quad_degree = 2 * (k + 1) + 2
    sb, db, tb = StressBasis(k), DisplacementBasis(k), TraceBasis(k)
    q = triangle_quadrature(quad_degree)
    area = mesh.area
    nt = mesh.n_triangles

    phi = sb.scalar.values(q.points)  # (nq, na)
    Mref = (phi * q.weights[:, None]).T @ phi  # reference, area 1/2
    G = np.einsum("sij,tij->st", SYM_GENERATORS, SYM_GENERATORS)
    trT = np.trace(SYM_GENERATORS, axis1=1, axis2=2)
    scale = 2.0 * area[:, None, None]
    mass_full = scale * np.kron(Mref, G)[None]
    mass_trace = scale * np.kron(Mref, np.outer(trT, trT))[None]
    # G - t t^T / 2 has dyadic entries, so this is exact
    mass_dev = scale * np.kron(Mref, G - 0.5 * np.outer(trT, trT))[None]

    psi = db.scalar.values(q.points)  # (nq, nb)
    MVref = (psi * q.weights[:, None]).T @ psi
    MV = scale * np.kron(MVref, np.eye(2))[None]

    _, _, JiT = jacobians(mesh)
    gref = sb.scalar.gradients(q.points)  # (nq, na, 2)
    g = np.einsum("tij,qaj->tqai", JiT, gref)
    # div(phi_a T_s)_c = sum_d T_s[c, d] d_d phi_a
    D = np.einsum("scd,tqad->tqasc", SYM_GENERATORS, g)
    B = np.einsum("q,qb,tqasc->tbcas", q.weights, psi, D)
    B = (2.0 * area)[:, None, None, None, None] * B
    B = B.reshape(nt, db.dim, sb.dim)

    eq = edge_quadrature(2 * (k + 1) + 2)
    tv = tb.scalar.values(eq.points)  # (nqe, nj)
    orient = mesh.edge_orientation()
    L = mesh.edge_length[mesh.edge_of_triangle]  # (nt, 3)
    C = np.zeros((nt, 3, tb.dim, sb.dim))
    for l in range(3):
        for forward in (True, False):
            sel = (orient[:, l] > 0) == forward
            if not sel.any():
                continue
            pts = edge_reference_points(eq.points, l, forward)
            ph = sb.scalar.values(pts)  # (nqe, na)
            base = np.einsum("q,qj,qa->ja", eq.weights, tv, ph)
            nu = mesh.triangle_normals[sel, l]  # (ns, 2)
            Tnu = np.einsum("scd,td->tsc", SYM_GENERATORS, nu)
            blk = np.einsum("ja,tsc->tjcas", base, Tnu)
            blk *= L[sel, l][:, None, None, None, None]
            C[sel, l] = blk.reshape(sel.sum(), tb.dim, sb.dim)

    return ElementMatrices(
        k=k, stress=sb, disp=db, trace=tb,
        mass_full=np.broadcast_to(mass_full, (nt,) + mass_full.shape[1:]).copy(),
        mass_trace=np.broadcast_to(mass_trace, (nt,) + mass_trace.shape[1:]).copy(),
        mass_dev=np.broadcast_to(mass_dev, (nt,) + mass_dev.shape[1:]).copy(),
        B=B, C=C, MV=np.broadcast_to(MV, (nt,) + MV.shape[1:]).copy(),
        quad_degree=quad_degree,
    )


def load_vectors(mesh, k, f, quad_degree=None):
    """``F[t, p] = (f, v_p)_K`` for a vectorized ``f(x, y) -> (fx, fy)``."""
    if quad_degree is None:
        quad_degree = 2 * (k + 1) + 2
    q = triangle_quadrature(quad_degree)
    db = DisplacementBasis(k)
    X = map_points(mesh, q.points)
    fx, fy = f(X[..., 0], X[..., 1])
    fv = np.stack(np.broadcast_arrays(fx, fy), axis=-1)  # (nt, nq, 2)
    vals = db.values(q.points)  # (nq, nb, 2)
    F = np.einsum("q,tqc,qpc->tp", q.weights, fv, vals)
    return 2.0 * mesh.area[:, None] * F


# ----------------------------------------------------------------------
# vector P2 Lagrange element for the primal coarse space


P2 = LagrangeBasis(2)
# reference P2 node -> (vertex i) or (edge l); vertices first, then edge
# midpoints in local-edge order (edge l opposite vertex l)
P2_VERTEX_NODES = [P2.vertex_node(i) for i in range(3)]
P2_EDGE_NODES = [
    int(np.argmin(np.linalg.norm(P2.nodes - REF_VERTICES[LOCAL_EDGES[l]].mean(0), axis=1)))
    for l in range(3)
]
P2_ORDER = np.array(P2_VERTEX_NODES + P2_EDGE_NODES)


def coarse_p2_matrices(mesh, material):
    """Local 12x12 matrices of
    ``a(w, v) = 2 mu (eps(w), eps(v)) + lam (P0 div w, P0 div v)``
    for vector P2 Lagrange functions.

    Local DOF ``2 * n + c`` where local node ``n`` runs over the three
    vertices and then the three edge midpoints (edge ``l`` opposite vertex
    ``l``)."""
    q = triangle_quadrature(2)
    _, _, JiT = jacobians(mesh)
    gref = P2.gradients(q.points)[:, P2_ORDER]  # (nq, 6, 2)
    g = np.einsum("tij,qaj->tqai", JiT, gref)
    nt = mesh.n_triangles
    # eps of phi_n e_c: E[t,q,n,c] = sym(e_c grad^T)
    E = np.zeros((nt, len(q.weights), 6, 2, 2, 2))
    for c in range(2):
        E[..., c, c, :] += 0.5 * g
        E[..., c, :, c] += 0.5 * g
    E = E.reshape(nt, len(q.weights), 12, 2, 2)
    area2 = 2.0 * mesh.area
    K = np.einsum("q,tqaij,tqbij->tab", q.weights, E, E) * area2[:, None, None]
    divs = g.reshape(nt, len(q.weights), 12)  # div(phi_n e_c) = d_c phi_n
    d = np.einsum("q,tqa->ta", q.weights, divs) * area2[:, None]
    return 2.0 * material.mu * K + material.lam * np.einsum(
        "ta,tb->tab", d, d
    ) / mesh.area[:, None, None]
