"""Hybridized mixed finite elements for 2D linear elasticity with
multilevel Schwarz solvers for the condensed multiplier system."""

from .localcond import LocalCondensation, MaterialParams
from .mesh import TriMesh, generate_mesh
from .schur import MultiplierSpace, SchurOperator, build_condensed_system

__version__ = "0.1.0"

__all__ = [
    "LocalCondensation",
    "MaterialParams",
    "MultiplierSpace",
    "SchurOperator",
    "TriMesh",
    "build_condensed_system",
    "generate_mesh",
]
