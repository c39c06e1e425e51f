"""Deterministic LP/MIP engine: bounded-variable primal simplex plus
depth-first branch and bound."""

from .bb import MipLimits, solve_mip
from .lpformat import to_lp_string, write_lp_file
from .model import EQUAL, GREATER, LESS, LinearModel, LpSolution, MipResult
from .simplex import solve_lp

__all__ = [
    "EQUAL",
    "GREATER",
    "LESS",
    "LinearModel",
    "LpSolution",
    "MipLimits",
    "MipResult",
    "solve_lp",
    "solve_mip",
    "to_lp_string",
    "write_lp_file",
]
