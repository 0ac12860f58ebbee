"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``CRITERION n: PASS|FAIL`` line listing every
sub-check, and the lines are repeated in the pytest terminal summary.
"""

import math
import time

import numpy as np
import pytest

from _oracles import full_hybrid_solve, relative_l2, stress_jump_residual
from conftest import record_criterion
from hybridmixed.app import StudyConfig, converge_study, precond_study, solve, standard_solution
from hybridmixed.elements import apply_compliance, local_matrices
from hybridmixed.localcond import LocalCondensation, MaterialParams, rigid_motion_trace
from hybridmixed.mesh import TriMesh, crisscross_mesh, hct_split, uniform_mesh
from hybridmixed.schur import build_condensed_system, kernel_dimension_dense

NUS = [0.49, 0.499, 0.4999, 0.49999, 0.499999, 0.4999999]


class Checks:
    def __init__(self, number):
        self.number = number
        self.items = []

    def add(self, label, ok, detail=""):
        self.items.append((label, bool(ok), detail))
        return ok

    def report(self, elapsed=None):
        ok = all(i[1] for i in self.items)
        parts = [f"{lab}{' ' + d if d else ''} [{'ok' if good else 'FAIL'}]" for lab, good, d in self.items]
        if elapsed is not None:
            parts.append(f"{elapsed:.0f}s")
        record_criterion(self.number, ok, "; ".join(parts))
        failed = [i[0] for i in self.items if not i[1]]
        assert not failed, f"criterion {self.number} failed: {', '.join(failed)}"


def _within(value, ref, rel):
    return abs(value - ref) <= rel * abs(ref)


def _errors_and_orders(grid, k, res):
    rows = converge_study(StudyConfig(grid=grid, resolutions=res, k=k))
    return rows


def _convergence(c, rows, orders_lo_hi, ref_row, ref_vals, rel):
    names = ("u", "sigma", "div")
    last = rows[-1]
    for name, (lo, hi) in zip(names, orders_lo_hi):
        o = getattr(last, f"order_{name}")
        c.add(f"order_{name}", lo <= o <= hi, f"{o:.2f} in [{lo}, {hi}]")
    row = next(r for r in rows if r.inv_h == ref_row)
    for name, ref in zip(names, ref_vals):
        v = getattr(row, f"err_{name}")
        c.add(
            f"err_{name}@{ref_row}", _within(v, ref, rel),
            f"{v:.4e} vs {ref:.4e} ({100 * (v / ref - 1):+.1f}%, tol {100 * rel:.0f}%)",
        )


def test_criterion_1_hct_k0():
    t0 = time.perf_counter()
    c = Checks(1)
    rows = _errors_and_orders("hct", 0, [4, 8, 16, 32])
    _convergence(
        c, rows, [(0.9, 1.1), (1.8, 2.1), (0.9, 1.1)], 32,
        (1.0976e-2, 3.1761e-3, 3.1827e-1), 0.20,
    )
    elapsed = time.perf_counter() - t0
    c.add("runtime", elapsed < 120, f"{elapsed:.0f}s < 120s")
    c.report()


def test_criterion_2_uniform_k2():
    t0 = time.perf_counter()
    c = Checks(2)
    rows = _errors_and_orders("uniform", 2, [4, 8, 16, 32])
    band = [(2.85, 3.15), (3.85, 4.15), (2.85, 3.15)]
    for r in rows[1:-1]:
        for name, (lo, hi) in zip(("u", "sigma", "div"), band):
            o = getattr(r, f"order_{name}")
            c.add(f"order_{name}@{r.inv_h}", lo <= o <= hi, f"{o:.2f}")
    _convergence(c, rows, band, 16, (3.4569e-5, 9.7454e-6, 9.9431e-4), 0.10)
    elapsed = time.perf_counter() - t0
    c.add("runtime", elapsed < 300, f"{elapsed:.0f}s < 300s")
    c.report()


def test_criterion_3_crisscross_k2():
    t0 = time.perf_counter()
    c = Checks(3)
    rows = _errors_and_orders("crisscross", 2, [4, 8, 16, 32])
    band = [(2.85, 3.15), (3.85, 4.15), (2.85, 3.15)]
    for r in rows[1:3]:
        for name, (lo, hi) in zip(("u", "sigma", "div"), band):
            o = getattr(r, f"order_{name}")
            c.add(f"order_{name}@{r.inv_h}", lo <= o <= hi, f"{o:.2f}")
    o32 = rows[3].order_div
    c.add("order_div@32", 2.85 <= o32 <= 3.15, f"{o32:.2f}")
    c.add("pcg converged", all(r.converged for r in rows))
    _convergence(c, rows[:3], band, 8, (7.2355e-5, 2.0057e-5, 2.1361e-3), 0.10)
    c.report(time.perf_counter() - t0)


def _table(preconditioners, resolutions):
    cfg = StudyConfig(
        study="precond", grid="uniform", resolutions=resolutions, k=2,
        nus=NUS, preconditioners=preconditioners,
    )
    return {t.preconditioner: t for t in precond_study(cfg)}


def test_criterion_4_one_level():
    t0 = time.perf_counter()
    c = Checks(4)
    tabs = _table(["one-level:vertex-patches", "one-level:edges"], [4])
    vp = tabs["one-level:vertex-patches"].rows[4]
    ed = tabs["one-level:edges"].rows[4]
    c.add("vertex-patch converged", None not in vp, str(vp))
    c.add("edge converged", None not in ed, str(ed))
    if None not in vp:
        c.add("vertex-patch <= 20", max(vp) <= 20)
        c.add("nondecreasing", all(b >= a for a, b in zip(vp, vp[1:])))
        c.add("growth <= +5", vp[-1] - vp[0] <= 5 and max(vp) - vp[0] <= 5)
    if None not in (vp[-1], ed[-1]):
        c.add("edges >= 5x vertex at nu=0.4999999", ed[-1] >= 5 * vp[-1], f"{ed[-1]} vs {vp[-1]}")
    c.report(time.perf_counter() - t0)


def _robustness(c, table, bound):
    counts = np.array([[np.nan if i is None else i for i in table.rows[n]] for n in sorted(table.rows)])
    name = table.preconditioner
    c.add(f"{name} converged", not np.isnan(counts).any())
    c.add(f"{name} <= {bound}", np.nanmax(counts) <= bound, f"max {int(np.nanmax(counts))}")
    ratio = np.nanmax(counts, axis=0) / np.nanmin(counts, axis=0)
    c.add(f"{name} max/min over 1/h <= 1.5", ratio.max() <= 1.5, f"worst {ratio.max():.2f}")
    return counts


def test_criterion_5_two_level():
    t0 = time.perf_counter()
    c = Checks(5)
    res = [4, 8, 16, 32]
    tabs = _table(["two-level::sym-multiplicative", "two-level::additive"], res)
    mult = _robustness(c, tabs["two-level::sym-multiplicative"], 10)
    add = _robustness(c, tabs["two-level::additive"], 58)
    for n, m, a in zip(res, mult, add):
        print(f"1/h={n}: multiplicative {m.astype(int).tolist()} additive {a.astype(int).tolist()}")
    c.report(time.perf_counter() - t0)


def test_criterion_6_multilevel():
    t0 = time.perf_counter()
    c = Checks(6)
    res = [4, 8, 16, 32]
    tab = _table(["multilevel::sym-multiplicative"], res)["multilevel::sym-multiplicative"]
    counts = np.array([[np.nan if i is None else i for i in tab.rows[n]] for n in res])
    c.add("converged", not np.isnan(counts).any())
    c.add("<= 14", np.nanmax(counts) <= 14, f"max {int(np.nanmax(counts))}")
    for n, row in zip(res, counts):
        print(f"1/h={n}: {row.astype(int).tolist()}")
    c.report(time.perf_counter() - t0)


ORACLE_MESHES = [
    ("uniform-2/k2", uniform_mesh(2), 2),
    ("uniform-2/k3", uniform_mesh(2), 3),
    ("uniform-4/k2", uniform_mesh(4), 2),
    ("crisscross-2/k2", crisscross_mesh(2), 2),
    ("crisscross-2/k3", crisscross_mesh(2), 3),
    ("crisscross-4/k2", crisscross_mesh(4), 2),
    ("hct-2/k0", hct_split(uniform_mesh(2)), 0),
    ("hct-2/k1", hct_split(uniform_mesh(2)), 1),
    ("hct-3/k0", hct_split(uniform_mesh(3)), 0),
]


def test_criterion_7_oracle_equivalence():
    t0 = time.perf_counter()
    c = Checks(7)
    mat = MaterialParams(0.5, 1.0)
    f = standard_solution(mat).load
    worst_s = worst_u = worst_j = 0.0
    for name, mesh, k in ORACLE_MESHES:
        assert mesh.n_triangles <= 64
        res = solve(mesh, k, mat, f, tol=1e-13, maxit=5000)
        s, u, _ = full_hybrid_solve(mesh, k, mat, f)
        es = relative_l2(res.fields.stress_coeffs, s)
        eu = relative_l2(res.fields.displacement_coeffs, u)
        ej = stress_jump_residual(mesh, local_matrices(mesh, k), res.fields.stress_coeffs)
        c.add(name, es <= 1e-9 and eu <= 1e-9 and ej <= 1e-8)
        worst_s, worst_u, worst_j = max(worst_s, es), max(worst_u, eu), max(worst_j, ej)
    c.add("worst", True, f"sigma {worst_s:.1e}, u {worst_u:.1e}, jump {worst_j:.1e}")
    c.report(time.perf_counter() - t0)


def test_criterion_8_structural_invariants():
    t0 = time.perf_counter()
    c = Checks(8)
    rng = np.random.default_rng(8)
    mat = MaterialParams(0.5, 1.0)
    cases = [("uniform-4", uniform_mesh(4)), ("hct-2", hct_split(uniform_mesh(2))),
             ("crisscross-1", crisscross_mesh(1)), ("crisscross-2", crisscross_mesh(2))]
    for name, mesh in cases:
        k = 0 if name.startswith("hct") else 2
        _, _, S, _ = build_condensed_system(mesh, k, mat)
        M = S.matrix
        scale = abs(M).max()
        c.add(f"{name} symmetric", abs(M - M.T).max() <= 1e-12 * scale)
        X = rng.standard_normal((M.shape[0], 1000))
        q = np.einsum("ij,ij->j", X, M @ X) / np.einsum("ij,ij->j", X, X)
        c.add(f"{name} psd", q.min() >= -1e-12 * scale, f"min {q.min():.1e}")
        dim = S.kernel_basis.shape[1]
        dense = kernel_dimension_dense(S)
        singular = name.startswith("crisscross")
        c.add(f"{name} kernel", (dim > 0) == singular and dim == dense, f"{dim}/{dense}")
    tri = TriMesh(np.array([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]]), [[0, 1, 2]])
    worst = 0.0
    for k in (1, 2, 3):
        cond = LocalCondensation(tri, k, mat)
        for cc, om in [((1, 0), 0), ((0, 1), 0), ((0, 0), 1)]:
            v = rigid_motion_trace(tri, 0, k, cc, om)
            worst = max(worst, np.abs(cond.S[0] @ v).max() / np.abs(cond.S[0]).max())
    c.add("rigid-motion nullity k>=1", worst < 1e-13, f"{worst:.1e}")
    err = 0.0
    for mu, lam in [(0.5, 1.0), (1.0, 1e6), (3.0, 0.0)]:
        got = apply_compliance(np.eye(2), MaterialParams(mu, lam))
        err = max(err, np.abs(got - np.eye(2) / (2 * mu + 2 * lam)).max() * (2 * mu + 2 * lam))
    c.add("compliance identity", err <= 4 * np.finfo(float).eps, f"{err:.1e}")
    c.report(time.perf_counter() - t0)


def test_criterion_9_norm_machinery():
    t0 = time.perf_counter()
    c = Checks(9)
    tri = TriMesh(np.array([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]]), [[0, 1, 2]])
    rng = np.random.default_rng(9)
    lo, hi = math.inf, 0.0
    worst_identity = 0.0
    for k in (0, 1, 2, 3):
        lams = rng.standard_normal((100, 6 * (k + 2)))
        for lt in (1.0, 1e3, 1e6):
            mat = MaterialParams(0.5, lt)
            cond = LocalCondensation(tri, k, mat)
            for v in lams:
                energy = cond.energy_norm_sq(0, v)
                quad = float(v @ cond.S[0] @ v)
                worst_identity = max(worst_identity, abs(energy - quad) / abs(quad))
                denom = 2 * mat.mu * cond.seminorm_h(0, v) ** 2 + lt * cond.seminorm_star(0, v) ** 2
                r = quad / denom
                lo, hi = min(lo, r), max(hi, r)
    c.add("energy = <S_K l, l>", worst_identity <= 1e-12, f"{worst_identity:.1e}")
    c.add("bracket", lo > 0 and hi / lo <= 10, f"[{lo:.3f}, {hi:.3f}]")
    c.report(time.perf_counter() - t0)
