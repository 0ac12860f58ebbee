# %% [markdown]
# # Local problems as lam grows
#
# The element saddle problem degenerates as lam -> inf: the constant field
# sigma = I has zero deviator and zero divergence, so only the volumetric
# part of the compliance controls it. The element Schur block then has a
# rank-one part of size lam along the normal flux of the multiplier, and
#
#     <S_K l, l>  ~  2 mu |l|_h^2 + lam |l|_*^2
#
# with constants independent of lam. Splitting off the constant field keeps
# the remaining local solve well conditioned.

# %%
import numpy as np

from hybridmixed.localcond import LocalCondensation, MaterialParams
from hybridmixed.mesh import TriMesh

tri = TriMesh(np.array([[0.0, 0.0], [1.0, 0.2], [0.3, 0.9]]), [[0, 1, 2]])
rng = np.random.default_rng(0)

# %% [markdown]
# ## Energy identity and norm equivalence
#
# ``energy`` pairs the recovered stress with the compliance; ``quad`` is the
# quadratic form of the element block. ``ratio`` divides by the
# parameter-weighted norm.

# %%
for k in range(4):
    for lam in [1.0, 1e3, 1e6]:
        cond = LocalCondensation(tri, k, MaterialParams(0.5, lam))
        gaps, ratios = [], []
        for v in rng.standard_normal((50, cond.nl)):
            quad = v @ cond.S[0] @ v
            gaps.append(abs(cond.energy_norm_sq(0, v) - quad) / quad)
            h, star = cond.seminorm_h(0, v), cond.seminorm_star(0, v)
            norm = 2 * cond.material.mu * h**2 + lam * star**2
            ratios.append(quad / norm)
        print(f"k={k} lam={lam:7.0e}  max gap {max(gaps):.1e}  "
              f"ratio in [{min(ratios):.3f}, {max(ratios):.3f}]")
