"""Sparse linear programs and the built-in simplex solver."""
from .problem import (
    SENSE_EQ,
    SENSE_LE,
    LpBuilder,
    LpProblem,
    LpSolution,
    LpStatus,
    add_epigraph_max,
)
from .simplex import active_kernel_name, solve

__all__ = [
    "SENSE_EQ",
    "SENSE_LE",
    "LpBuilder",
    "LpProblem",
    "LpSolution",
    "LpStatus",
    "add_epigraph_max",
    "active_kernel_name",
    "solve",
]
