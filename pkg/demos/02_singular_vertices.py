# %% [markdown]
# # Singular vertices and the kernel of the multiplier system
#
# On a criss-cross grid every cell centre is a vertex where only two lines
# cross. The trace space then carries extra multipliers invisible to every
# local problem, and the condensed matrix S becomes singular. The kernel
# dimension equals the number of such vertices, and the right-hand side is
# orthogonal to it, so PCG with kernel projection still converges.

# %%
import numpy as np

from hybridmixed.app import evaluate_errors, solve, standard_solution
from hybridmixed.localcond import LocalCondensation, MaterialParams
from hybridmixed.mesh import crisscross_mesh, uniform_mesh
from hybridmixed.schur import MultiplierSpace, assemble_rhs, assemble_schur

material = MaterialParams(0.5, 1.0)
exact = standard_solution(material)

# %% [markdown]
# ## Counting singular vertices

# %%
for name, mesh in [("uniform", uniform_mesh(4)), ("crisscross", crisscross_mesh(4))]:
    report = mesh.singularity_report()
    print(f"{name:11s} vertices {mesh.n_nodes:3d}, "
          f"singular interior {len(report.interior_singular_vertices):3d}")

# %% [markdown]
# ## Kernel and right-hand side consistency

# %%
mesh = crisscross_mesh(4)
cond = LocalCondensation(mesh, 2, material)
space = MultiplierSpace(mesh, 2)
S = assemble_schur(mesh, space, cond)
b = assemble_rhs(mesh, space, cond, load=cond.load(exact.load))
Z = S.kernel_basis
print("kernel dimension:", Z.shape[1])
print("max |Z^T b| / max |b|:", np.abs(Z.T @ b).max() / np.abs(b).max())

# %% [markdown]
# ## Solving
#
# The stress and displacement do not depend on which representative of the
# multiplier is found.

# %%
res = solve(mesh, 2, material, exact.load, tol=1e-10, maxit=2000)
print(f"method {res.method}, iterations {res.iterations}, converged {res.converged}")
eu, es, ed = evaluate_errors(res.fields, exact)
print(f"errors: u {eu:.3e}  sigma {es:.3e}  div {ed:.3e}")
