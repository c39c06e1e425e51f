"""Generic bounded-variable linear / integer model and solution types."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..errors import ValidationError

LESS = "<="
GREATER = ">="
EQUAL = "=="


@dataclass
class Variable:
    name: str
    lower: float
    upper: float
    is_integer: bool = False
    obj: float = 0.0


@dataclass
class Constraint:
    coeffs: list[tuple[int, float]]
    sense: str
    rhs: float
    name: str = ""


@dataclass
class LinearModel:
    """Minimization model over finitely bounded variables."""

    variables: list[Variable] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)

    def add_variable(
        self,
        name: str,
        lower: float,
        upper: float,
        *,
        is_integer: bool = False,
        obj: float = 0.0,
    ) -> int:
        if not (np.isfinite(lower) and np.isfinite(upper)):
            raise ValidationError(f"variable {name}: bounds must be finite")
        if lower > upper:
            raise ValidationError(f"variable {name}: lower > upper")
        self.variables.append(Variable(name, float(lower), float(upper), is_integer, float(obj)))
        return len(self.variables) - 1

    def add_constraint(
        self,
        coeffs: Sequence[tuple[int, float]],
        sense: str,
        rhs: float,
        name: str = "",
    ) -> int:
        if sense not in (LESS, GREATER, EQUAL):
            raise ValidationError(f"bad sense {sense!r}")
        n = len(self.variables)
        for idx, _ in coeffs:
            if not 0 <= idx < n:
                raise ValidationError(f"constraint {name!r} references variable {idx}")
        self.constraints.append(Constraint(list(coeffs), sense, float(rhs), name))
        return len(self.constraints) - 1

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def integer_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.is_integer]


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | iteration-limit
    x: np.ndarray
    objective: float
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


@dataclass
class MipResult:
    status: str  # optimal | infeasible | time-limit | node-limit | gap-limit | threshold | no-solution
    x: Optional[np.ndarray]
    upper_bound: float
    lower_bound: float
    nodes: int
    wall_time: float

    @property
    def gap_pct(self) -> float:
        if self.x is None or not np.isfinite(self.upper_bound):
            return float("inf")
        if self.upper_bound > 0:
            return 100.0 * (self.upper_bound - self.lower_bound) / self.upper_bound
        if abs(self.upper_bound - self.lower_bound) <= 1e-9:
            return 0.0
        return float("inf")

    @property
    def has_solution(self) -> bool:
        return self.x is not None
