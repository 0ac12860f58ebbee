"""Global multiplier space, the condensed SPSD operator, its right-hand side,
and kernel detection at singular vertices."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .elements import EdgeLagrangeBasis, LagrangeBasis
from .localcond import LocalCondensation


class MultiplierSpace:
    """Vector P_{k+1} Lagrange DOFs on interior edges.

    Global DOF ``(i * (k + 2) + j) * 2 + c`` for interior edge number ``i``
    (interior edges in increasing edge index), edge node ``j`` counted from
    the lower global vertex, and component ``c``. Boundary edges carry no
    DOFs.
    """

    def __init__(self, mesh, k):
        self.mesh = mesh
        self.k = k
        self.nodes_per_edge = k + 2
        self.dofs_per_edge = 2 * (k + 2)
        self.interior_edges = mesh.interior_edges
        self.edge_number = -np.ones(mesh.n_edges, dtype=np.int64)
        self.edge_number[self.interior_edges] = np.arange(len(self.interior_edges))
        self.total_dofs = self.dofs_per_edge * len(self.interior_edges)
        self.edge_of_dof = np.repeat(self.interior_edges, self.dofs_per_edge)
        # element -> global DOFs; -1 marks boundary-edge slots
        local = np.arange(self.dofs_per_edge)
        num = self.edge_number[mesh.edge_of_triangle]  # (nt, 3)
        ed = num[:, :, None] * self.dofs_per_edge + local[None, None, :]
        ed[num < 0] = -1
        self.element_dofs = ed.reshape(mesh.n_triangles, -1)

    def edge_dofs(self, e):
        i = self.edge_number[e]
        if i < 0:
            return np.empty(0, dtype=np.int64)
        return i * self.dofs_per_edge + np.arange(self.dofs_per_edge)

    def _union(self, edge_sets):
        blocks = []
        for es in edge_sets:
            d = [self.edge_dofs(e) for e in sorted(set(es))]
            d = np.concatenate(d) if d else np.empty(0, dtype=np.int64)
            if len(d):
                blocks.append(d)
        return blocks

    def edge_blocks(self):
        return self._union([[e] for e in self.interior_edges])

    def element_blocks(self):
        return self._union(self.mesh.edge_of_triangle)

    def vertex_patch_blocks(self):
        """One block per vertex: all interior edges sharing that vertex."""
        return self._union(self.mesh.vertex_edges())

    def coarse_vertex_patch_blocks(self):
        """One block per vertex of the parent mesh: every interior fine edge
        of the children of the coarse triangles around that vertex."""
        fine = self.mesh
        coarse = getattr(fine, "parent", None)
        if coarse is None:
            raise ValueError("coarse-vertex patches need a refined mesh with lineage")
        children = np.argsort(fine.parent_triangle, kind="stable").reshape(-1, 4)
        return self._union(
            fine.edge_of_triangle[children[ts]].ravel()
            for ts in coarse.vertex_triangles()
        )

    def blocks(self, kind):
        if kind in ("edges", "edge"):
            return self.edge_blocks()
        if kind in ("elements", "element"):
            return self.element_blocks()
        if kind in ("vertex-patches", "vertex", "vertices"):
            return self.vertex_patch_blocks()
        if kind == "coarse-vertex-patches":
            return self.coarse_vertex_patch_blocks()
        raise ValueError(f"unknown block type {kind!r}")

    def gather(self, lam):
        """Global vector -> local element vectors (zero on boundary edges)."""
        ext = np.append(np.asarray(lam, dtype=float), 0.0)
        return ext[self.element_dofs]

    def scatter(self, local):
        out = np.zeros(self.total_dofs + 1)
        idx = np.where(self.element_dofs < 0, self.total_dofs, self.element_dofs)
        np.add.at(out, idx.ravel(), np.asarray(local).ravel())
        return out[:-1]


def build_multiplier_space(mesh, k):
    return MultiplierSpace(mesh, k)


class SchurOperator(LinearOperator):
    """Condensed multiplier operator, applied matrix-free element by element
    or through an assembled sparse matrix."""

    def __init__(self, space, cond, kernel_basis=None):
        n = space.total_dofs
        super().__init__(dtype=np.float64, shape=(n, n))
        self.space = space
        self.cond = cond
        self._matrix = None
        self.kernel_basis = (
            np.zeros((n, 0)) if kernel_basis is None else kernel_basis
        )

    def _matvec(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        loc = self.space.gather(x)
        y = np.einsum("tmn,tn->tm", self.cond.S, loc)
        return self.space.scatter(y)

    def _rmatvec(self, x):
        return self._matvec(x)

    def _adjoint(self):
        return self

    @property
    def matrix(self):
        if self._matrix is None:
            ed = self.space.element_dofs
            nl = ed.shape[1]
            rows = np.repeat(ed, nl, axis=1).ravel()
            cols = np.tile(ed, (1, nl)).ravel()
            vals = self.cond.S.reshape(len(ed), -1).ravel()
            keep = (rows >= 0) & (cols >= 0)
            n = self.shape[0]
            M = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))
            M = M.tocsr()
            M.sum_duplicates()
            self._matrix = (M + M.T) * 0.5
            self._matrix = self._matrix.tocsr()
        return self._matrix

    def energy(self, lam):
        """sum_K (A sigma_lambda, sigma_lambda)_K via the local stress fields."""
        loc = self.space.gather(lam)
        return float(self.cond.lambda_energy(loc).sum())

    def project(self, x):
        """Euclidean projection onto the range (orthogonal complement of the
        kernel basis)."""
        Z = self.kernel_basis
        if Z.shape[1] == 0:
            return x
        return x - Z @ (Z.T @ x)


def assemble_schur(mesh, space, cond, kernel=True):
    if cond.mesh is not mesh or space.mesh is not mesh or cond.k != space.k:
        raise ValueError("inconsistent mesh/DOF layouts")
    op = SchurOperator(space, cond)
    if kernel:
        op.kernel_basis = detect_kernel(mesh, space, cond)
    return op


def assemble_rhs(mesh, space, cond, f=None, load=None):
    """``b[m] = -(f, u_{mu_m})`` summed over elements."""
    if load is None:
        load = cond.load(f)
    loc = -np.einsum("tpn,tp->tn", cond.Y, load)
    return space.scatter(loc)


def _vertex_singular_coupling(mesh, space, cond, a, vt):
    """Coupling between the dual multiplier functions attached to vertex
    ``a`` and the stresses ``phi_a^K T_s``; returns the matrix and the
    mapping of its rows to global DOF coefficient vectors."""
    k = space.k
    sb = LagrangeBasis(k + 1)
    ebasis = EdgeLagrangeBasis(k + 1)
    Minv_ref = np.linalg.inv(ebasis.mass())
    npe = space.nodes_per_edge
    edges = [e for e in mesh.vertex_edges()[a] if not mesh.boundary_edge[e]]
    tris = vt[a]
    J = np.zeros((2 * len(edges), 3 * len(tris)))
    rows = []
    for r, e in enumerate(edges):
        L = mesh.edge_length[e]
        node = 0 if mesh.edges[e][0] == a else npe - 1
        w = Minv_ref[:, node] / L  # dual function in the primal edge basis
        for c in range(2):
            vec = np.zeros(space.total_dofs)
            d = space.edge_dofs(e).reshape(npe, 2)
            vec[d[:, c]] = w
            rows.append(vec)
        for col, t in enumerate(tris):
            ls = np.flatnonzero(mesh.edge_of_triangle[t] == e)
            if len(ls) == 0:
                continue
            l = ls[0]
            la = list(mesh.triangles[t]).index(a)
            an = sb.vertex_node(la)
            Ce = cond.em.C[t, l].reshape(npe, 2, -1, 3)[:, :, an, :]  # (j, c, s)
            J[2 * r : 2 * r + 2, 3 * col : 3 * col + 3] = np.einsum("j,jcs->cs", w, Ce)
    return J, np.array(rows)


def detect_kernel(mesh, space, cond, report=None, rtol=1e-10):
    """Orthonormal basis (columns) of the multiplier-system kernel, built from
    vertex-local null spaces at interior singular vertices."""
    if report is None:
        report = mesh.singularity_report()
    verts = report.interior_singular_vertices
    n = space.total_dofs
    if len(verts) == 0:
        return np.zeros((n, 0))
    vt = mesh.vertex_triangles()
    vecs = []
    for a in verts:
        J, rows = _vertex_singular_coupling(mesh, space, cond, a, vt)
        for c in sla.null_space(J.T, rcond=rtol).T:
            vecs.append(rows.T @ c)
    if not vecs:
        return np.zeros((n, 0))
    return sla.orth(np.column_stack(vecs))


def kernel_dimension_dense(S, tol=1e-9):
    """Numerical nullity of a small assembled operator (dense eigenvalues)."""
    M = S.matrix.toarray() if hasattr(S, "matrix") else np.asarray(S)
    ev = np.linalg.eigvalsh(M)
    return int(np.sum(ev < tol * ev.max()))


def export_triplets(matrix, path, rhs=None):
    """Write ``row col value`` lines (0-based) after a header
    ``n_rows n_cols nnz``; the optional rhs goes to ``path + '.rhs'``."""
    M = sp.coo_matrix(matrix)
    with open(path, "w") as fh:
        fh.write(f"{M.shape[0]} {M.shape[1]} {M.nnz}\n")
        for i, j, v in zip(M.row, M.col, M.data):
            fh.write(f"{i} {j} {v:.17g}\n")
    if rhs is not None:
        np.savetxt(f"{path}.rhs", np.asarray(rhs), fmt="%.17g")


def build_condensed_system(mesh, k, material, f=None, quad_degree=None):
    """Convenience: condensation, space, operator (with kernel) and rhs."""
    cond = LocalCondensation(mesh, k, material, quad_degree)
    space = MultiplierSpace(mesh, k)
    S = assemble_schur(mesh, space, cond)
    b = assemble_rhs(mesh, space, cond, f) if f is not None else np.zeros(space.total_dofs)
    return cond, space, S, b
