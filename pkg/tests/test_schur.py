import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import condensed_from_full, full_hybrid_solve
from hybridmixed.app import standard_solution
from hybridmixed.localcond import LocalCondensation, MaterialParams
from hybridmixed.mesh import crisscross_mesh, hct_split, uniform_mesh, uniform_refine
from hybridmixed.schur import (
    MultiplierSpace,
    assemble_schur,
    build_condensed_system,
    detect_kernel,
    export_triplets,
    kernel_dimension_dense,
)

MAT = MaterialParams(0.5, 1.0)

CASES = [
    ("uniform-2", uniform_mesh(2), 2),
    ("uniform-3", uniform_mesh(3), 3),
    ("crisscross-1", crisscross_mesh(1), 2),
    ("crisscross-2", crisscross_mesh(2), 2),
    ("crisscross-3", crisscross_mesh(3), 3),
    ("crisscross-2-k0", crisscross_mesh(2), 0),
    ("hct-2", hct_split(uniform_mesh(2)), 0),
    ("hct-2-k1", hct_split(uniform_mesh(2)), 1),
]


@pytest.fixture(scope="module", params=CASES, ids=[c[0] for c in CASES])
def system(request):
    _, mesh, k = request.param
    cond, space, S, b = build_condensed_system(mesh, k, MAT, standard_solution(MAT).load)
    return mesh, k, cond, space, S, b


def test_symmetric_psd(system):
    *_, S, _ = system
    M = S.matrix
    assert abs(M - M.T).max() <= 1e-12 * abs(M).max()
    ev = np.linalg.eigvalsh(M.toarray())
    assert ev.min() > -1e-12 * ev.max()


def test_matrix_free_equals_assembled(system, rng):
    *_, S, _ = system
    x = rng.standard_normal(S.shape[0])
    assert np.allclose(S @ x, S.matrix @ x, rtol=0, atol=1e-12 * np.abs(S.matrix @ x).max())


def test_energy_equals_quadratic_form(system, rng):
    *_, S, _ = system
    x = rng.standard_normal(S.shape[0])
    assert S.energy(x) == pytest.approx(x @ (S.matrix @ x), rel=1e-10)


def test_kernel_matches_dense_nullity(system):
    mesh, *_, S, _ = system
    Z = S.kernel_basis
    assert Z.shape[1] == kernel_dimension_dense(S)
    if Z.shape[1]:
        assert np.allclose(Z.T @ Z, np.eye(Z.shape[1]), atol=1e-12)
        assert np.abs(S.matrix @ Z).max() < 1e-10 * abs(S.matrix).max()


def test_kernel_size_is_singular_vertex_count(system):
    mesh, *_, S, _ = system
    assert S.kernel_basis.shape[1] == len(mesh.singularity_report().interior_singular_vertices)


def test_rhs_is_consistent(system):
    *_, S, b = system
    Z = S.kernel_basis
    if Z.shape[1]:
        assert np.abs(Z.T @ b).max() <= 1e-12 * np.abs(b).max()


def test_projection_is_orthogonal(system, rng):
    *_, S, _ = system
    x = rng.standard_normal(S.shape[0])
    p = S.project(x)
    assert np.allclose(S.kernel_basis.T @ p, 0, atol=1e-12)
    assert np.allclose(S.project(p), p)


def test_full_system_kernel_agrees(system):
    mesh, k, *_, S, _ = system
    _, _, nullity = full_hybrid_solve(mesh, k, MAT, standard_solution(MAT).load)
    assert nullity == S.kernel_basis.shape[1]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(0, 3))
def test_gather_scatter_adjoint(seed, k):
    space = MultiplierSpace(crisscross_mesh(2), k)
    r = np.random.default_rng(seed)
    x = r.standard_normal(space.total_dofs)
    L = r.standard_normal(space.element_dofs.shape)
    assert space.scatter(L) @ x == pytest.approx(np.sum(L * space.gather(x)), rel=1e-12)
    # boundary slots gather zeros
    assert np.all(space.gather(x)[space.element_dofs < 0] == 0)


@pytest.mark.parametrize("k", range(4))
def test_space_layout(k):
    m = uniform_mesh(3)
    space = MultiplierSpace(m, k)
    assert space.total_dofs == 2 * (k + 2) * len(m.interior_edges)
    counts = np.bincount(space.element_dofs[space.element_dofs >= 0], minlength=space.total_dofs)
    assert np.all(counts == 2)  # each interior edge is shared by two triangles


@pytest.mark.parametrize("kind", ["edges", "elements", "vertex-patches", "coarse-vertex-patches"])
def test_blocks_cover(kind):
    m = uniform_refine(uniform_mesh(2))
    space = MultiplierSpace(m, 2)
    blocks = space.blocks(kind)
    covered = np.unique(np.concatenate(blocks))
    assert np.array_equal(covered, np.arange(space.total_dofs))
    for b in blocks:
        assert len(np.unique(b)) == len(b)


def test_block_errors():
    space = MultiplierSpace(uniform_mesh(2), 2)
    with pytest.raises(ValueError):
        space.blocks("faces")
    with pytest.raises(ValueError, match="lineage"):
        space.blocks("coarse-vertex-patches")


def test_inconsistent_layout_rejected():
    m = uniform_mesh(2)
    cond = LocalCondensation(m, 2, MAT)
    with pytest.raises(ValueError):
        assemble_schur(m, MultiplierSpace(m, 3), cond)
    with pytest.raises(ValueError):
        assemble_schur(uniform_mesh(2), MultiplierSpace(m, 2), cond)


def test_detect_kernel_on_uniform_is_empty():
    m = uniform_mesh(4)
    cond = LocalCondensation(m, 2, MAT)
    space = MultiplierSpace(m, 2)
    assert detect_kernel(m, space, cond).shape == (space.total_dofs, 0)


def test_export_roundtrip(tmp_path):
    _, _, S, b = build_condensed_system(crisscross_mesh(2), 2, MAT, standard_solution(MAT).load)
    path = tmp_path / "S.txt"
    export_triplets(S.matrix, path, rhs=b)
    lines = path.read_text().splitlines()
    n, m, nnz = map(int, lines[0].split())
    assert (n, m, nnz) == (*S.shape, S.matrix.nnz)
    data = np.loadtxt(lines[1:])
    M = np.zeros(S.shape)
    M[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2]
    assert np.array_equal(M, S.matrix.toarray())
    assert np.array_equal(np.loadtxt(f"{path}.rhs"), b)


@pytest.mark.parametrize("mesh", [uniform_mesh(2), crisscross_mesh(2)], ids=["uniform", "crisscross"])
def test_operator_and_rhs_match_dense_elimination(mesh):
    f = standard_solution(MAT).load
    _, _, S, b = build_condensed_system(mesh, 2, MAT, f)
    S_ref, b_ref = condensed_from_full(mesh, 2, MAT, f)
    M = S.matrix.toarray()
    assert np.abs(M - S_ref).max() <= 1e-10 * np.abs(S_ref).max()
    assert np.abs(b - b_ref).max() <= 1e-10 * np.abs(b_ref).max()
