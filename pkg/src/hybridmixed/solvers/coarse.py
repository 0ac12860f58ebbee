"""Primal P2 coarse space, intergrid transfer to the multiplier space and a
W-cycle multigrid for the coarse problem."""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..elements import EdgeLagrangeBasis, coarse_p2_matrices, edge_quadrature
from .schwarz import SchwarzSmoother

log = logging.getLogger(__name__)


class P2Space:
    """Continuous vector P2 Lagrange DOFs on a triangle mesh.

    Node ``v`` for vertex ``v`` and ``n_nodes + e`` for the midpoint of edge
    ``e``; DOF ``2 * node + c``. ``free`` lists the DOFs away from the
    Dirichlet boundary.
    """

    def __init__(self, mesh):
        self.mesh = mesh
        nv = mesh.n_nodes
        self.n_p2_nodes = nv + mesh.n_edges
        self.ndofs_full = 2 * self.n_p2_nodes
        self.element_nodes = np.hstack([mesh.triangles, nv + mesh.edge_of_triangle])
        self.element_dofs = (
            2 * self.element_nodes[:, :, None] + np.arange(2)[None, None, :]
        ).reshape(mesh.n_triangles, 12)
        bnode = np.concatenate([mesh.boundary_vertex, mesh.boundary_edge])
        self.free_nodes = np.flatnonzero(~bnode)
        self.free = (2 * self.free_nodes[:, None] + np.arange(2)).ravel()
        self.n_free = len(self.free)
        self.free_index = -np.ones(self.ndofs_full, dtype=np.int64)
        self.free_index[self.free] = np.arange(self.n_free)

    def node_coordinates(self):
        m = self.mesh
        mid = 0.5 * (m.nodes[m.edges[:, 0]] + m.nodes[m.edges[:, 1]])
        return np.vstack([m.nodes, mid])

    def vertex_patch_blocks(self):
        """Free DOFs of each interior vertex together with the midpoints of
        its edges (local index space ``0..n_free``)."""
        m = self.mesh
        blocks = []
        for v, es in enumerate(m.vertex_edges()):
            nodes = [v] + [m.n_nodes + e for e in es]
            d = (2 * np.asarray(nodes)[:, None] + np.arange(2)).ravel()
            d = self.free_index[d]
            d = np.sort(d[d >= 0])
            if len(d):
                blocks.append(d)
        return blocks


def assemble_p2(space, material, free=True):
    """``A_H`` of ``a_H(w, v) = 2 mu (eps w, eps v) + lam (P0 div w, P0 div v)``."""
    Ke = coarse_p2_matrices(space.mesh, material)
    ed = space.element_dofs
    rows = np.repeat(ed, 12, axis=1).ravel()
    cols = np.tile(ed, (1, 12)).ravel()
    n = space.ndofs_full
    A = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A = ((A + A.T) * 0.5).tocsr()
    if free:
        A = A[space.free][:, space.free].tocsr()
    return A


class CoarseProblem:
    """Assembled ``A_H`` on the free DOFs of ``W_H`` with a sparse LU."""

    def __init__(self, mesh, material):
        self.space = P2Space(mesh)
        self.A = assemble_p2(self.space, material)
        self._lu = spla.splu(self.A.tocsc())

    def solve(self, r):
        return self._lu.solve(np.asarray(r, dtype=float))

    __call__ = solve


def _p2_values(bary):
    """Reference P2 basis (vertices, then edge midpoints opposite each
    vertex) at barycentric coordinates ``bary`` (n, 3)."""
    l0, l1, l2 = bary.T
    return np.column_stack(
        [l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
         4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1]
    )


def _barycentric(verts, pts):
    T = np.column_stack([verts[1] - verts[0], verts[2] - verts[0]])
    st = np.linalg.solve(T, (pts - verts[0]).T).T
    return np.column_stack([1 - st.sum(1), st])


def harmonic_extension(coarse, fine, material):
    """``I~ : W_H -> W_h`` on full P2 DOF vectors.

    Values on the coarse skeleton are the coarse P2 field itself; the DOFs
    interior to each coarse triangle solve the local ``a_h`` problem with
    those boundary values.
    """
    if getattr(fine, "parent", None) is not coarse or fine.parent_triangle is None:
        raise ValueError("fine mesh lacks refinement lineage to the coarse mesh")
    cs, fs = P2Space(coarse), P2Space(fine)
    xyz = fs.node_coordinates()
    Kf = coarse_p2_matrices(fine, material)
    par = fine.parent_triangle
    tf = fine.triangles_of_edge
    interior_edge = (tf[:, 1] >= 0) & (par[tf[:, 0]] == par[np.maximum(tf[:, 1], 0)])
    children = np.argsort(par, kind="stable").reshape(coarse.n_triangles, 4)
    rows, cols, vals = [], [], []
    done = np.zeros(fs.n_p2_nodes, dtype=bool)
    for T in range(coarse.n_triangles):
        ch = children[T]
        nodes = np.unique(fs.element_nodes[ch])
        is_int = np.zeros(len(nodes), dtype=bool)
        enodes = nodes >= fine.n_nodes
        is_int[enodes] = interior_edge[nodes[enodes] - fine.n_nodes]
        bary = _barycentric(coarse.nodes[coarse.triangles[T]], xyz[nodes])
        Phi = _p2_values(bary)  # (15, 6) scalar coarse basis at fine nodes
        Phi[np.abs(Phi) < 1e-14] = 0.0
        cdofs = cs.element_dofs[T]
        # local vector interpolation (2 * 15, 12)
        P = np.kron(Phi, np.eye(2))
        # local fine stiffness over the four children
        pos = {n: i for i, n in enumerate(nodes)}
        A = np.zeros((2 * len(nodes), 2 * len(nodes)))
        for t in ch:
            loc = np.array([pos[n] for n in fs.element_nodes[t]])
            d = (2 * loc[:, None] + np.arange(2)).ravel()
            A[np.ix_(d, d)] += Kf[t]
        I = (2 * np.flatnonzero(is_int)[:, None] + np.arange(2)).ravel()
        B = (2 * np.flatnonzero(~is_int)[:, None] + np.arange(2)).ravel()
        P[I] = -np.linalg.solve(A[np.ix_(I, I)], A[np.ix_(I, B)] @ P[B])
        for i, n in enumerate(nodes):
            if done[n]:
                continue
            done[n] = True
            for c in range(2):
                r = 2 * i + c
                nz = np.flatnonzero(P[r])
                rows.extend([2 * n + c] * len(nz))
                cols.extend(cdofs[nz])
                vals.extend(P[r, nz])
    return sp.csr_matrix((vals, (rows, cols)), shape=(fs.ndofs_full, cs.ndofs_full))


def edge_projection(fine, space):
    """``Q_h``: full fine P2 DOF vector -> multiplier DOFs (per-edge L2
    projection of the quadratic trace onto P_{k+1})."""
    k = space.k
    eb = EdgeLagrangeBasis(k + 1)
    q2 = EdgeLagrangeBasis(2)
    eq = edge_quadrature(k + 4)
    N = np.einsum("q,qi,qj->ij", eq.weights, eb.values(eq.points), q2.values(eq.points))
    Q = np.linalg.solve(eb.mass(), N)  # (k+2, 3), length-independent
    Q[np.abs(Q) < 1e-14] = 0.0
    rows, cols, vals = [], [], []
    nv = fine.n_nodes
    for e in space.interior_edges:
        lo, hi = fine.edges[e]
        p2nodes = (lo, nv + e, hi)
        d = space.edge_dofs(e).reshape(-1, 2)
        for j in range(k + 2):
            for m in range(3):
                if Q[j, m] == 0.0:
                    continue
                for c in range(2):
                    rows.append(d[j, c])
                    cols.append(2 * p2nodes[m] + c)
                    vals.append(Q[j, m])
    return sp.csr_matrix(
        (vals, (rows, cols)), shape=(space.total_dofs, 2 * (nv + fine.n_edges))
    )


def build_intergrid(coarse, fine, space, material):
    """``I_H^h = Q_h I~_H^h`` restricted to the free coarse DOFs."""
    if space.mesh is not fine:
        raise ValueError("multiplier space does not live on the fine mesh")
    Itil = harmonic_extension(coarse, fine, material)
    Q = edge_projection(fine, space)
    cs = P2Space(coarse)
    return (Q @ Itil[:, cs.free]).tocsr()


class P2Multigrid:
    """W-cycle for ``A_H`` over a hierarchy of nested meshes (coarsest
    first). Prolongation is the harmonic extension; smoothing is the
    symmetrized vertex-patch block Gauss-Seidel; the coarsest level is
    solved directly."""

    def __init__(self, meshes, material, pre=2, post=2, gamma=2):
        if len(meshes) < 1:
            raise ValueError("empty mesh hierarchy")
        self.pre, self.post, self.gamma = pre, post, gamma
        self.spaces = [P2Space(m) for m in meshes]
        self.A = [assemble_p2(s, material) for s in self.spaces]
        self.P = [None]
        for lvl in range(1, len(meshes)):
            It = harmonic_extension(meshes[lvl - 1], meshes[lvl], material)
            fs, cs = self.spaces[lvl], self.spaces[lvl - 1]
            self.P.append(It[fs.free][:, cs.free].tocsr())
        self.smoothers = [None] + [
            SchwarzSmoother(self.A[l], self.spaces[l].vertex_patch_blocks())
            for l in range(1, len(meshes))
        ]
        self._lu = spla.splu(self.A[0].tocsc())
        self.A_top = self.A[-1]

    @property
    def levels(self):
        return len(self.A)

    def cycle(self, lvl, r):
        if lvl == 0:
            return self._lu.solve(r)
        sm = self.smoothers[lvl]
        nb = len(sm.blocks)
        fwd, bwd = range(nb), range(nb - 1, -1, -1)
        x = np.zeros_like(r)
        res = r.copy()
        for _ in range(self.pre):
            sm.sweep(x, res, fwd)
            sm.sweep(x, res, bwd)
        P = self.P[lvl]
        rc = P.T @ res
        ec = np.zeros(P.shape[1])
        for g in range(self.gamma if lvl > 1 else 1):
            ec += self.cycle(lvl - 1, rc - (self.A[lvl - 1] @ ec if g else 0.0))
        c = P @ ec
        x += c
        res -= self.A[lvl] @ c
        for _ in range(self.post):
            sm.sweep(x, res, fwd)
            sm.sweep(x, res, bwd)
        return x

    def __call__(self, r):
        return self.cycle(self.levels - 1, np.asarray(r, dtype=float))
