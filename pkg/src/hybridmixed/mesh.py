"""Triangular meshes of the unit square: generators, topology, refinement and
vertex-singularity diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SINGULAR_TOL = 1e-8
NEARLY_SINGULAR_KAPPA = 0.1


class MeshError(ValueError):
    """Raised for invalid or non-conforming mesh input."""


class TriMesh:
    """Conforming triangulation with full edge/vertex topology.

    Triangles are stored with positive orientation. Edges are deduplicated
    vertex pairs ``(i, j)`` with ``i < j``; the edge parametrization always
    runs from the lower to the higher global vertex index. For an interior
    edge ``triangles_of_edge[e] = (t0, t1)`` with ``t0 < t1`` and the stored
    normal is the outward normal of ``t0``; boundary edges have ``t1 = -1``
    and the outward normal of the domain.
    """

    def __init__(self, nodes, triangles, macro=False):
        nodes = np.ascontiguousarray(nodes, dtype=float)
        tris = np.array(triangles, dtype=np.int64)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise MeshError("nodes must be an (N, 2) array")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise MeshError("triangles must be a (T, 3) array")
        if tris.size and (tris.min() < 0 or tris.max() >= len(nodes)):
            raise MeshError("triangle references a nonexistent node")

        p = nodes[tris]
        signed = 0.5 * _cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        scale = max(np.ptp(nodes, axis=0).max(), 1.0) ** 2
        if np.any(np.abs(signed) <= 1e-14 * scale):
            raise MeshError("zero-area triangle")
        flip = signed < 0
        tris[flip] = tris[flip][:, [0, 2, 1]]

        self.nodes = nodes
        self.triangles = tris
        self.macro = bool(macro)
        self._build_topology()
        # refinement lineage, filled by uniform_refine
        self.parent = None
        self.parent_triangle = None

    # ------------------------------------------------------------------
    def _build_topology(self):
        tris = self.triangles
        nt = len(tris)
        # local edge l is opposite local vertex l
        local = np.array([[1, 2], [2, 0], [0, 1]])
        pairs = tris[:, local].reshape(-1, 2)
        key = np.sort(pairs, axis=1)
        edges, inverse, counts = np.unique(
            key, axis=0, return_inverse=True, return_counts=True
        )
        inverse = inverse.reshape(-1)
        if np.any(counts > 2):
            raise MeshError("edge shared by more than two triangles")
        self.edges = edges
        self.edge_of_triangle = inverse.reshape(nt, 3)

        tri_idx = np.repeat(np.arange(nt), 3)
        order = np.lexsort((tri_idx, inverse))
        toe = -np.ones((len(edges), 2), dtype=np.int64)
        first = np.ones(len(order), dtype=bool)
        first[1:] = inverse[order][1:] != inverse[order][:-1]
        toe[inverse[order][first], 0] = tri_idx[order][first]
        toe[inverse[order][~first], 1] = tri_idx[order][~first]
        self.triangles_of_edge = toe
        self.boundary_edge = toe[:, 1] < 0
        self.boundary_vertex = np.zeros(len(self.nodes), dtype=bool)
        self.boundary_vertex[edges[self.boundary_edge].ravel()] = True

        p = self.nodes[tris]
        self.area = 0.5 * _cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        d = self.nodes[edges[:, 1]] - self.nodes[edges[:, 0]]
        self.edge_length = np.hypot(d[:, 0], d[:, 1])

        # outward normals of every (triangle, local edge)
        a = p[:, local[:, 0]]
        b = p[:, local[:, 1]]
        t = b - a
        n = np.stack([t[..., 1], -t[..., 0]], axis=-1)
        self.triangle_normals = n / np.linalg.norm(n, axis=-1, keepdims=True)

        t0 = toe[:, 0]
        l0 = np.argmax(self.edge_of_triangle[t0] == np.arange(len(edges))[:, None], axis=1)
        self.edge_normal = self.triangle_normals[t0, l0]

    # ------------------------------------------------------------------
    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def interior_edges(self):
        return np.flatnonzero(~self.boundary_edge)

    def vertex_triangles(self):
        """List of incident triangle indices for every vertex."""
        out = [[] for _ in range(self.n_nodes)]
        for t, tri in enumerate(self.triangles):
            for v in tri:
                out[v].append(t)
        return out

    def vertex_edges(self):
        out = [[] for _ in range(self.n_nodes)]
        for e, (i, j) in enumerate(self.edges):
            out[i].append(e)
            out[j].append(e)
        return out

    def edge_orientation(self):
        """``+1`` where local edge ``l`` of a triangle runs (in counterclockwise
        order) from the lower to the higher global vertex, ``-1`` otherwise."""
        tris = self.triangles
        start = tris[:, [1, 2, 0]]
        end = tris[:, [2, 0, 1]]
        return np.where(start < end, 1, -1)

    def h(self):
        return float(self.edge_length.max())

    def validate(self):
        """Check the topological invariants; raise MeshError on failure."""
        if np.any(self.area <= 0):
            raise MeshError("non-positive triangle orientation")
        nb = self.boundary_edge.sum()
        inc = np.bincount(self.edge_of_triangle.ravel(), minlength=self.n_edges)
        if np.any(inc[self.boundary_edge] != 1) or np.any(inc[~self.boundary_edge] != 2):
            raise MeshError("edge incidence counts are inconsistent")
        if not np.allclose(np.linalg.norm(self.edge_normal, axis=1), 1.0):
            raise MeshError("edge normals are not unit length")
        # the stored normal of interior edges belongs to the first triangle
        t0 = self.triangles_of_edge[:, 0]
        c = self.nodes[self.triangles[t0]].mean(axis=1)
        mid = 0.5 * (self.nodes[self.edges[:, 0]] + self.nodes[self.edges[:, 1]])
        if np.any(np.einsum("ij,ij->i", mid - c, self.edge_normal) <= 0):
            raise MeshError("edge normal does not point out of its first triangle")
        _check_hanging_nodes(self)
        euler = self.n_nodes - self.n_edges + self.n_triangles
        return {"euler": int(euler), "boundary_edges": int(nb)}

    # ------------------------------------------------------------------
    def singularity_report(self, kappa0=NEARLY_SINGULAR_KAPPA, tol=SINGULAR_TOL):
        return singularity_report(self, kappa0=kappa0, tol=tol)

    def write(self, path):
        write_mesh(self, path)

    def __repr__(self):
        return (
            f"TriMesh(nodes={self.n_nodes}, triangles={self.n_triangles}, "
            f"edges={self.n_edges})"
        )


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _check_hanging_nodes(mesh):
    """A node lying inside a boundary edge of the triangulation is hanging."""
    be = mesh.edges[mesh.boundary_edge]
    if len(be) == 0:
        return
    a = mesh.nodes[be[:, 0]]
    b = mesh.nodes[be[:, 1]]
    d = b - a
    L2 = np.einsum("ij,ij->i", d, d)
    for v, x in enumerate(mesh.nodes):
        t = np.einsum("ij,ij->i", x - a, d) / L2
        dist = np.abs(_cross(d, x - a)) / np.sqrt(L2)
        inside = (t > 1e-10) & (t < 1 - 1e-10) & (dist < 1e-10 * np.sqrt(L2))
        inside &= (be[:, 0] != v) & (be[:, 1] != v)
        if inside.any():
            raise MeshError(f"hanging node {v}: mesh is not conforming")


# ----------------------------------------------------------------------
# generators


def uniform_mesh(n):
    """Unit square, n x n cells, each split by the diagonal parallel to
    the line from (0, 0) to (1, 1)."""
    if n < 1:
        raise MeshError("resolution must be a positive integer")
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    tris = np.concatenate(
        [np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])]
    )
    return TriMesh(nodes, tris)


def crisscross_mesh(n):
    """Unit square, n x n cells, each split into four by its center."""
    if n < 1:
        raise MeshError("resolution must be a positive integer")
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x, indexing="xy")
    corners = np.column_stack([X.ravel(), Y.ravel()])
    xc = (np.arange(n) + 0.5) / n
    XC, YC = np.meshgrid(xc, xc, indexing="xy")
    centers = np.column_stack([XC.ravel(), YC.ravel()])
    nodes = np.concatenate([corners, centers])
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    c = len(corners) + (j * n + i).ravel()
    tris = np.concatenate(
        [
            np.column_stack([v00, v10, c]),
            np.column_stack([v10, v11, c]),
            np.column_stack([v11, v01, c]),
            np.column_stack([v01, v00, c]),
        ]
    )
    return TriMesh(nodes, tris)


def hct_split(base):
    """Macro-simplex (HCT) grid: split each triangle into three through its
    barycenter."""
    nv = base.n_nodes
    tris = base.triangles
    bary = base.nodes[tris].mean(axis=1)
    nodes = np.concatenate([base.nodes, bary])
    b = nv + np.arange(len(tris))
    new = np.concatenate(
        [
            np.column_stack([tris[:, 0], tris[:, 1], b]),
            np.column_stack([tris[:, 1], tris[:, 2], b]),
            np.column_stack([tris[:, 2], tris[:, 0], b]),
        ]
    )
    return TriMesh(nodes, new, macro=True)


def uniform_refine(mesh):
    """Red refinement: every triangle is split into four congruent children
    through its edge midpoints.

    The midpoint of coarse edge ``e`` becomes fine vertex ``n_nodes + e``.
    The fine mesh keeps ``parent`` (the coarse mesh) and ``parent_triangle``.
    """
    nv = mesh.n_nodes
    mid = 0.5 * (mesh.nodes[mesh.edges[:, 0]] + mesh.nodes[mesh.edges[:, 1]])
    nodes = np.concatenate([mesh.nodes, mid])
    v = mesh.triangles
    m = nv + mesh.edge_of_triangle  # m[:, l] is opposite vertex l
    children = np.stack(
        [
            np.column_stack([v[:, 0], m[:, 2], m[:, 1]]),
            np.column_stack([m[:, 2], v[:, 1], m[:, 0]]),
            np.column_stack([m[:, 1], m[:, 0], v[:, 2]]),
            np.column_stack([m[:, 0], m[:, 1], m[:, 2]]),
        ],
        axis=1,
    ).reshape(-1, 3)
    fine = TriMesh(nodes, children)
    fine.parent = mesh
    fine.parent_triangle = np.repeat(np.arange(mesh.n_triangles), 4)
    return fine


def attach_parent(fine, coarse, chunk=512):
    """Record ``coarse`` as the parent of a nested ``fine`` mesh.

    Each fine triangle is located by its centroid; all of its vertices must
    lie in that coarse triangle, and every coarse triangle must hold four
    children. Returns ``fine``.
    """
    P = coarse.nodes[coarse.triangles]  # (nc, 3, 2)
    a, b, c = P[:, 0], P[:, 1], P[:, 2]
    det = _cross(b - a, c - a)
    F = fine.nodes[fine.triangles]
    parent = np.full(fine.n_triangles, -1)
    tol = 1e-10
    for s in range(0, fine.n_triangles, chunk):
        pts = F[s:s + chunk]  # (m, 3, 2)
        d = pts[:, None, :, :] - a[None, :, None, :]  # (m, nc, 3, 2)
        l1 = _cross(d, (c - a)[None, :, None, :]) / det[None, :, None]
        l2 = _cross((b - a)[None, :, None, :], d) / det[None, :, None]
        inside = (l1 >= -tol) & (l2 >= -tol) & (l1 + l2 <= 1 + tol)
        hit = inside.all(axis=2)  # (m, nc)
        if np.any(hit.sum(axis=1) != 1):
            raise MeshError("fine mesh is not nested in the coarse mesh")
        parent[s:s + chunk] = hit.argmax(axis=1)
    if np.any(np.bincount(parent, minlength=coarse.n_triangles) != 4):
        raise MeshError("every coarse triangle needs exactly four children")
    fine.parent = coarse
    fine.parent_triangle = parent
    return fine


def refinement_hierarchy(coarsest, levels):
    """``[coarsest, refine(coarsest), ...]`` with ``levels`` meshes."""
    out = [coarsest]
    for _ in range(levels - 1):
        out.append(uniform_refine(out[-1]))
    return out


def generate_mesh(kind, resolution=1, base=None, path=None):
    """Build a mesh of the unit square.

    ``kind`` is one of ``uniform``, ``crisscross``, ``hct`` (barycentric split
    of ``base``, or of the uniform mesh at ``resolution`` when no base is
    given) or ``file`` (read ``path``).
    """
    if kind == "file":
        if path is None:
            raise MeshError("file meshes need a path")
        return read_mesh(path)
    if int(resolution) != resolution or resolution < 1:
        raise MeshError("resolution must be a positive integer")
    resolution = int(resolution)
    if kind == "uniform":
        return uniform_mesh(resolution)
    if kind == "crisscross":
        return crisscross_mesh(resolution)
    if kind in ("hct", "macro"):
        return hct_split(base if base is not None else uniform_mesh(resolution))
    raise MeshError(f"unknown mesh kind {kind!r}")


# ----------------------------------------------------------------------
# text format


def write_mesh(mesh, path):
    lines = [f"nodes {mesh.n_nodes}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path):
    """Read the plain-text format written by :func:`write_mesh`.

    Blank lines and ``#`` comments are ignored; triangle indices are 1-based.
    """
    try:
        raw = Path(path).read_text().splitlines()
    except OSError as exc:
        raise MeshError(f"cannot read mesh file {path}: {exc}") from exc
    rows = [ln.split("#", 1)[0].split() for ln in raw]
    rows = [r for r in rows if r]
    try:
        if rows[0][0] != "nodes":
            raise MeshError("mesh file must start with 'nodes N'")
        nn = int(rows[0][1])
        nodes = np.array([[float(a) for a in r] for r in rows[1 : 1 + nn]])
        hdr = rows[1 + nn]
        if hdr[0] != "triangles":
            raise MeshError("expected 'triangles T' after node block")
        nt = int(hdr[1])
        tris = np.array([[int(a) for a in r] for r in rows[2 + nn : 2 + nn + nt]]) - 1
    except (IndexError, ValueError) as exc:
        raise MeshError(f"cannot parse mesh file {path}: {exc}") from exc
    if nodes.shape != (nn, 2) or tris.shape != (nt, 3):
        raise MeshError("mesh file block sizes do not match their headers")
    mesh = TriMesh(nodes, tris)
    _check_hanging_nodes(mesh)
    return mesh


# ----------------------------------------------------------------------
# vertex singularity


@dataclass
class VertexSingularityReport:
    kappa_per_vertex: np.ndarray
    kappa_min: float
    singular_vertices: np.ndarray
    nearly_singular_vertices: np.ndarray
    interior_singular_vertices: np.ndarray


def vertex_angles(mesh):
    """Interior angle of every triangle at each of its three vertices."""
    p = mesh.nodes[mesh.triangles]
    ang = np.empty((mesh.n_triangles, 3))
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        ang[:, i] = np.arctan2(np.abs(_cross(a, b)), np.einsum("ij,ij->i", a, b))
    return ang


def ordered_fan(mesh, v, vertex_tris=None):
    """Triangles around vertex ``v`` in consecutive order (each neighbour
    pair shares an edge through ``v``). For a boundary vertex the fan starts
    at a triangle carrying a boundary edge."""
    tris = vertex_tris[v] if vertex_tris is not None else [
        t for t in range(mesh.n_triangles) if v in mesh.triangles[t]
    ]
    if len(tris) <= 1:
        return list(tris)
    edges_at = {}
    for t in tris:
        for e in mesh.edge_of_triangle[t]:
            if v in mesh.edges[e]:
                edges_at.setdefault(e, []).append(t)
    start = tris[0]
    for e, ts in edges_at.items():
        if len(ts) == 1:
            start = ts[0]
            break
    fan = [start]
    seen = {start}
    while True:
        cur = fan[-1]
        nxt = None
        for e in mesh.edge_of_triangle[cur]:
            if v not in mesh.edges[e]:
                continue
            for t in edges_at[e]:
                if t not in seen:
                    nxt = t
                    break
            if nxt is not None:
                break
        if nxt is None:
            break
        fan.append(nxt)
        seen.add(nxt)
    return fan


def singularity_report(mesh, kappa0=NEARLY_SINGULAR_KAPPA, tol=SINGULAR_TOL):
    """Angle-defect measure of how close every vertex is to being singular.

    kappa(a) is the largest ``|theta_i + theta_j - pi|`` over consecutive
    triangles in the fan at ``a`` (cyclically for interior vertices). It is
    ``+inf`` when the fan has a single triangle.
    """
    ang = vertex_angles(mesh)
    vt = mesh.vertex_triangles()
    kappa = np.full(mesh.n_nodes, np.inf)
    for v in range(mesh.n_nodes):
        fan = ordered_fan(mesh, v, vt)
        m = len(fan)
        if m < 2:
            continue
        theta = np.array([ang[t, list(mesh.triangles[t]).index(v)] for t in fan])
        if mesh.boundary_vertex[v]:
            sums = theta[:-1] + theta[1:]
        else:
            sums = theta + np.roll(theta, -1)
        kappa[v] = np.max(np.abs(sums - math.pi))
    finite = np.isfinite(kappa)
    kmin = float(kappa[finite].min()) if finite.any() else math.inf
    singular = np.flatnonzero(kappa < tol)
    nearly = np.flatnonzero(kappa < kappa0)
    return VertexSingularityReport(
        kappa_per_vertex=kappa,
        kappa_min=kmin,
        singular_vertices=singular,
        nearly_singular_vertices=nearly,
        interior_singular_vertices=singular[~mesh.boundary_vertex[singular]],
    )
