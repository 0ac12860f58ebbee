# %% [markdown]
# # Convergence on a manufactured solution
#
# The displacement is ``u = (e^(x-y) x y (1-x)(1-y), sin(pi x) sin(pi y))``
# on the unit square, clamped on the boundary. The load is ``-div sigma``
# with ``sigma = 2 mu eps(u) + lam tr eps(u) I``. For degree ``k`` the
# stress error should fall like ``h^(k+2)``, the displacement and divergence
# errors like ``h^(k+1)``.

# %%
import sys

from hybridmixed.app import StudyConfig, converge_study

# %% [markdown]
# ## Uniform grid, k = 2
#
# Each row gives the errors in u, sigma and div sigma with the observed
# orders between consecutive resolutions.

# %%
converge_study(StudyConfig(grid="uniform", k=2, resolutions=[4, 8, 16]), sys.stdout)

# %% [markdown]
# ## Split grid, k = 0
#
# The lowest degree needs a macro-element grid: each cell of a uniform
# grid is split into three triangles through its barycentre. The stress
# error still gains one order over the displacement: second order for
# sigma, first for u and div sigma.

# %%
converge_study(StudyConfig(grid="hct", k=0, resolutions=[4, 8, 16]), sys.stdout)
