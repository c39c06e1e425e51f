"""Bandit-guided two-phase genetic algorithm over surgery orderings."""

from .bandit import (
    CROSSOVER_OPS,
    MUTATION_OPS,
    BanditState,
    nmcb_values,
    ucb_select,
    ucb_update,
    ucb_value,
)
from .engine import Chromosome, RgaParams, RgaResult, run_rga
from .operators import crossover, mutate

__all__ = [
    "BanditState",
    "CROSSOVER_OPS",
    "Chromosome",
    "MUTATION_OPS",
    "RgaParams",
    "RgaResult",
    "crossover",
    "mutate",
    "nmcb_values",
    "run_rga",
    "ucb_select",
    "ucb_update",
    "ucb_value",
]
