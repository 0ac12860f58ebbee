"""Manufactured solutions, error norms, study drivers and the CLI."""

from .errors import evaluate_errors, observed_orders
from .manufactured import ManufacturedSolution, standard_solution
from .studies import ErrorRow, StudyConfig, converge_study, precond_study, solve

__all__ = [
    "ErrorRow",
    "ManufacturedSolution",
    "StudyConfig",
    "converge_study",
    "evaluate_errors",
    "observed_orders",
    "precond_study",
    "solve",
    "standard_solution",
]
