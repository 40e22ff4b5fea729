"""Locally perturbed random walks on Z^d: simulation, exact oracles and experiments."""

from .lattice import CovarianceMatrix, Membrane, point
from .laws import (
    JumpLaw,
    categorical,
    diagonal_embedding,
    law_from_dict,
    lazy_simple_neighbor,
    loglog_radial,
    point_mass,
    polynomial_tail,
    reg_varying,
    simple_neighbor,
)
from .walker import WalkConfig, coupled_run, run, run_auxiliary, simulate_batch

__version__ = "0.1.0"

__all__ = [
    "CovarianceMatrix",
    "JumpLaw",
    "Membrane",
    "WalkConfig",
    "categorical",
    "coupled_run",
    "diagonal_embedding",
    "law_from_dict",
    "lazy_simple_neighbor",
    "loglog_radial",
    "point",
    "point_mass",
    "polynomial_tail",
    "reg_varying",
    "run",
    "run_auxiliary",
    "simple_neighbor",
    "simulate_batch",
]
