"""Inertial, relaxed, relative-error inexact projective splitting.

Solves monotone inclusions ``0 in sum_i G_i^* T_i G_i (z)`` by projecting
onto separating hyperplanes in a product space, with a LASSO instantiation
and a comparison harness.
"""

from .lasso import (
    LassoProblem,
    build_problem,
    classical_config,
    inertial_config,
    ista_oracle,
    objective,
    random_instance,
    run_comparison,
)
from .params import InertiaRelaxationBudget, alpha_from_beta, beta_from_alpha
from .product import GammaGeometry, ProductPoint
from .solver import MonotoneBlock, SolverConfig, SplittingProblem, Status, solve

__version__ = "0.1.0"

__all__ = [
    "GammaGeometry",
    "InertiaRelaxationBudget",
    "LassoProblem",
    "MonotoneBlock",
    "ProductPoint",
    "SolverConfig",
    "SplittingProblem",
    "Status",
    "alpha_from_beta",
    "beta_from_alpha",
    "build_problem",
    "classical_config",
    "inertial_config",
    "ista_oracle",
    "objective",
    "random_instance",
    "run_comparison",
    "solve",
]
