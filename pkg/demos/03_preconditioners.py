# %% [markdown]
# # Schwarz preconditioners in the nearly incompressible limit
#
# PCG iteration counts for the multiplier system as the Poisson ratio
# approaches 1/2. Edge blocks lose robustness; vertex-patch blocks do not,
# and adding a coarse P2 displacement problem removes the growth in 1/h.

# %%
import sys

from hybridmixed.app import StudyConfig, precond_study

config = StudyConfig(
    study="precond",
    resolutions=[4, 8, 16],
    nus=[0.3, 0.49, 0.4999, 0.4999999],
    preconditioners=[
        "one-level:edges",
        "one-level:vertex-patches",
        "two-level",
        "two-level::additive",
        "multilevel",
    ],
)

# %% [markdown]
# Columns are Poisson ratios; empty cells mark a run that hit the iteration
# cap.

# %%
precond_study(config, sys.stdout)
