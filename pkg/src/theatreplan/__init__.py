"""Operating-room planning and scheduling toolkit.

Exact time-indexed models, a column-generation solver seeded by a
bandit-guided genetic algorithm, priority-rule baselines, and
disruption / buffer-robustness analysis, exposed as a library, a CLI
and an HTTP service.
"""

from .core import (
    Assignment,
    CostBreakdown,
    CostParams,
    FeasibilityReport,
    Instance,
    Schedule,
    Surgery,
    check_feasibility,
    evaluate,
    overtime_cost,
    recover_rooms,
)
from .instances import GenSpec, generate, load_instance, save_instance

__all__ = [
    "Assignment",
    "CostBreakdown",
    "CostParams",
    "FeasibilityReport",
    "GenSpec",
    "Instance",
    "Schedule",
    "Surgery",
    "check_feasibility",
    "evaluate",
    "generate",
    "load_instance",
    "overtime_cost",
    "recover_rooms",
    "save_instance",
]

__version__ = "0.1.0"
