"""Iterative solvers and preconditioners for the condensed multiplier system."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .coarse import (
    CoarseProblem,
    P2Multigrid,
    P2Space,
    assemble_p2,
    build_intergrid,
    edge_projection,
    harmonic_extension,
)
from .pcg import PreconditionerBreakdown, SolveReport, jacobi, pcg
from .schwarz import SchwarzSmoother, TwoLevelSchwarz

log = logging.getLogger(__name__)

KINDS = ("diagonal", "one-level", "two-level", "multilevel")
BLOCK_TYPES = ("edges", "elements", "vertex-patches", "coarse-vertex-patches", "none")
MODES = ("additive", "sym-multiplicative")


@dataclass
class PrecondConfig:
    """Preconditioner selection.

    ``levels`` is the depth of the P2 hierarchy used by the multilevel coarse
    solver (``None``: down to the root mesh). Two-level and multilevel
    preconditioners live on a mesh obtained by uniform refinement.
    """

    kind: str = "one-level"
    block_type: str = "vertex-patches"
    schwarz_mode: str = "sym-multiplicative"
    coarse_solver: str = "exact"
    levels: int | None = None
    pre_smooth: int = 2
    post_smooth: int = 2

    def validate(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown preconditioner kind {self.kind!r}")
        if self.block_type not in BLOCK_TYPES:
            raise ValueError(f"unknown block type {self.block_type!r}")
        if self.schwarz_mode not in MODES:
            raise ValueError(f"unknown Schwarz mode {self.schwarz_mode!r}")
        if self.kind != "diagonal" and self.block_type == "none":
            raise ValueError(
                "Schwarz preconditioners need fine-level blocks; a coarse "
                "correction alone is singular"
            )
        if self.coarse_solver not in ("exact", "w-cycle"):
            raise ValueError(f"unknown coarse solver {self.coarse_solver!r}")
        if self.levels is not None and self.levels < 1:
            raise ValueError("levels must be >= 1")
        return self


def build_one_level_schwarz(S, space, block_type="vertex-patches", mode="sym-multiplicative"):
    A = S.matrix if hasattr(S, "matrix") else S
    return SchwarzSmoother(A, space.blocks(block_type), mode)


def build_two_level(S, space, coarse, intergrid, one_level):
    """Combine a fine-level smoother with ``intergrid @ coarse @ intergrid.T``."""
    if intergrid.shape[0] != space.total_dofs:
        raise ValueError("intergrid operator does not match the multiplier layout")
    n_coarse = getattr(coarse, "A", None)
    if n_coarse is not None and intergrid.shape[1] != n_coarse.shape[0]:
        raise ValueError("intergrid operator does not match the coarse layout")
    return TwoLevelSchwarz(one_level, intergrid, coarse)


def mesh_lineage(mesh):
    """``[root, ..., mesh]`` following the ``parent`` links."""
    chain = [mesh]
    while getattr(chain[-1], "parent", None) is not None:
        chain.append(chain[-1].parent)
    return chain[::-1]


def build_multilevel(S, space, material, one_level, levels=None, pre=2, post=2):
    """Two-level Schwarz whose coarse solve is a W-cycle over the P2
    hierarchy below ``space.mesh.parent``."""
    chain = mesh_lineage(space.mesh)[:-1]
    if not chain:
        raise ValueError("multiplier mesh has no coarse parent")
    if levels is not None:
        chain = chain[-levels:]
    if len(chain) == 1:
        log.info("P2 hierarchy of depth 1: multilevel reduces to exact two-level")
    mg = P2Multigrid(chain, material, pre=pre, post=post)
    P = build_intergrid(chain[-1], space.mesh, space, material)
    return TwoLevelSchwarz(one_level, P, mg)


def build_preconditioner(S, space, material, config=None):
    config = (config or PrecondConfig()).validate()
    if config.kind == "diagonal":
        return jacobi(S)
    one = build_one_level_schwarz(S, space, config.block_type, config.schwarz_mode)
    if config.kind == "one-level":
        return one
    coarse_mesh = getattr(space.mesh, "parent", None)
    if coarse_mesh is None:
        raise ValueError("two-level preconditioners need a mesh with refinement lineage")
    if config.kind == "multilevel" or config.coarse_solver == "w-cycle":
        return build_multilevel(
            S, space, material, one, config.levels, config.pre_smooth, config.post_smooth
        )
    P = build_intergrid(coarse_mesh, space.mesh, space, material)
    return build_two_level(S, space, CoarseProblem(coarse_mesh, material), P, one)


def symmetry_defect(M, n, rng=None, trials=3):
    """max |<M x, y> - <x, M y>| / (|x||y||M|) over random pairs."""
    rng = np.random.default_rng(rng)
    worst = 0.0
    for _ in range(trials):
        x, y = rng.standard_normal(n), rng.standard_normal(n)
        Mx, My = M(x), M(y)
        scale = np.linalg.norm(Mx) * np.linalg.norm(y) + 1e-300
        worst = max(worst, abs(Mx @ y - x @ My) / scale)
    return worst


__all__ = [
    "CoarseProblem",
    "P2Multigrid",
    "P2Space",
    "PrecondConfig",
    "PreconditionerBreakdown",
    "SchwarzSmoother",
    "SolveReport",
    "TwoLevelSchwarz",
    "assemble_p2",
    "build_intergrid",
    "build_multilevel",
    "build_one_level_schwarz",
    "build_preconditioner",
    "build_two_level",
    "edge_projection",
    "harmonic_extension",
    "jacobi",
    "mesh_lineage",
    "pcg",
    "symmetry_defect",
]
