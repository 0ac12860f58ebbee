"""Reference computations that avoid the production code paths under test."""

from math import factorial

import numpy as np
import scipy.linalg as sla

from hybridmixed.elements import load_vectors, local_matrices


def monomial_integral(a, b):
    """int_{reference triangle} x^a y^b = a! b! / (a + b + 2)!"""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def full_hybrid_system(mesh, k, material, f):
    """Dense matrix and right-hand side of the unreduced hybrid system in
    (sigma, u, lambda), with the sizes of the three blocks.

    Every multiplier belongs to an interior edge; its DOFs are numbered here
    independently of the library's multiplier space.
    """
    em = local_matrices(mesh, k)
    nt = mesh.n_triangles
    ns, nu = em.stress.dim, em.disp.dim
    ne = em.trace.dim
    A = em.compliance_matrix(material)
    interior = [e for e in range(mesh.n_edges) if mesh.triangles_of_edge[e, 1] >= 0]
    slot = {e: i for i, e in enumerate(interior)}
    n_s, n_u, n_l = nt * ns, nt * nu, ne * len(interior)
    N = n_s + n_u + n_l
    K = np.zeros((N, N))
    for t in range(nt):
        s = slice(t * ns, (t + 1) * ns)
        u = slice(n_s + t * nu, n_s + (t + 1) * nu)
        K[s, s] = A[t]
        K[u, s] = em.B[t]
        K[s, u] = em.B[t].T
        for l in range(3):
            e = mesh.edge_of_triangle[t, l]
            if e not in slot:
                continue
            r = slice(n_s + n_u + slot[e] * ne, n_s + n_u + (slot[e] + 1) * ne)
            K[r, s] -= em.C[t, l]
            K[s, r] -= em.C[t, l].T
    rhs = np.zeros(N)
    rhs[n_s : n_s + n_u] = load_vectors(mesh, k, f).ravel()
    return K, rhs, (n_s, n_u, n_l)


def full_hybrid_solve(mesh, k, material, f):
    """Dense solve of the unreduced hybrid system. Kernel directions of the
    multiplier block are removed by bordering with an orthonormal basis of
    ker C^T computed from the assembled coupling itself. Returns stress and
    displacement coefficients and the dimension of that kernel."""
    K, rhs, (n_s, n_u, n_l) = full_hybrid_system(mesh, k, material, f)
    N = len(rhs)
    Z = sla.null_space(K[n_s + n_u :, :n_s].T) if n_l else np.zeros((0, 0))
    m = Z.shape[1] if Z.size else 0
    if m:
        Kb = np.zeros((N + m, N + m))
        Kb[:N, :N] = K
        Kb[n_s + n_u : N, N:] = Z
        Kb[N:, n_s + n_u : N] = Z.T
        x = np.linalg.solve(Kb, np.concatenate([rhs, np.zeros(m)]))[:N]
    else:
        x = np.linalg.solve(K, rhs)
    nt = mesh.n_triangles
    return x[:n_s].reshape(nt, -1), x[n_s : n_s + n_u].reshape(nt, -1), m


def condensed_from_full(mesh, k, material, f):
    """Multiplier operator and right-hand side obtained by eliminating
    (sigma, u) from the dense full system. Elimination gives -S lambda =
    -K_lx K_xx^{-1} r_x; both sides are negated so that S is positive
    semidefinite."""
    K, rhs, (n_s, n_u, _) = full_hybrid_system(mesh, k, material, f)
    n = n_s + n_u
    Kxx, Kxl = K[:n, :n], K[:n, n:]
    S = Kxl.T @ np.linalg.solve(Kxx, Kxl)
    b = Kxl.T @ np.linalg.solve(Kxx, rhs[:n])
    return S, b


def dense_pinv_solve(S, b):
    M = S.toarray() if hasattr(S, "toarray") else np.asarray(S)
    return np.linalg.pinv(M, rcond=1e-10, hermitian=True) @ b


def stress_jump_residual(mesh, em, stress):
    """max over interior edges of |sum_K <mu, sigma nu>| relative to the
    largest single-element contribution."""
    acc = {}
    scale = 0.0
    for t in range(mesh.n_triangles):
        for l in range(3):
            e = mesh.edge_of_triangle[t, l]
            if mesh.triangles_of_edge[e, 1] < 0:
                continue
            v = em.C[t, l] @ stress[t]
            scale = max(scale, np.abs(v).max())
            acc[e] = acc.get(e, 0.0) + v
    worst = max((np.abs(v).max() for v in acc.values()), default=0.0)
    return worst / max(scale, 1e-300)


def p1_projection_of_bubble():
    """L2(0,1) projection of t(1 - t) onto P1 expressed at t = 0 and t = 1,
    from the 2x2 normal equations in the basis {1 - t, t}."""
    M = np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    rhs = np.array([1 / 12, 1 / 12])  # int (1-t) t (1-t), int t t (1-t)
    return np.linalg.solve(M, rhs)


def relative_l2(a, b):
    d = np.asarray(a) - np.asarray(b)
    return float(np.linalg.norm(d) / max(np.linalg.norm(b), 1e-300))
