"""Adaptive operator selection: UCB scores with a change-detection reset.

Each operator accumulates a total reward TR and a selection count TOS.
The score is TR/TOS + 2*sqrt(2*ln(TOS)/TOS) - the ln of the operator's
own count, exactly as the source formula is printed.  When one
operator's mean reward runs away from the rest, the whole category is
reset so stale evidence cannot lock in a choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..errors import ValidationError

CROSSOVER_OPS = ("pmx", "ox1", "ox2")
MUTATION_OPS = ("swap", "insertion", "scramble", "inversion")

OUTCOME_IMPROVED = "improved"
OUTCOME_FEASIBLE = "feasible"
OUTCOME_INFEASIBLE = "infeasible"


@dataclass
class BanditState:
    categories: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: {
            "crossover": CROSSOVER_OPS,
            "mutation": MUTATION_OPS,
        }
    )
    tr: dict[str, float] = field(default_factory=dict)
    tos: dict[str, int] = field(default_factory=dict)
    resets: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for ops in self.categories.values():
            for op in ops:
                self.tr.setdefault(op, 0.0)
                self.tos.setdefault(op, 0)
        for cat in self.categories:
            self.resets.setdefault(cat, 0)

    def category_of(self, op: str) -> str:
        for cat, ops in self.categories.items():
            if op in ops:
                return cat
        raise ValidationError(f"unknown operator {op!r}")


def ucb_value(tr: float, tos: int) -> float:
    """Score of an operator with reward sum tr over tos selections."""
    if tos < 1:
        raise ValidationError("ucb_value needs at least one selection")
    return tr / tos + 2.0 * math.sqrt(2.0 * math.log(tos) / tos)


def ucb_select(state: BanditState, category: str) -> str:
    """Never-tried operators first (lowest index), then argmax score."""
    ops = state.categories[category]
    for op in ops:
        if state.tos[op] == 0:
            return op
    best_op = ops[0]
    best_score = ucb_value(state.tr[ops[0]], state.tos[ops[0]])
    for op in ops[1:]:
        score = ucb_value(state.tr[op], state.tos[op])
        if score > best_score + 1e-12:
            best_op, best_score = op, score
    return best_op


def ucb_update(
    state: BanditState,
    op: str,
    outcome: str,
    l_reward: float = 1.0,
    f_reward: float = 0.25,
    r_penalty: float = 0.1,
    reset_threshold: float = 0.5,
    reset_min_samples: int = 5,
) -> bool:
    """Record one trial; returns True when the category was reset.

    improved: the trial beat the best-so-far.  feasible: produced a
    valid schedule without improving.  infeasible: the decode failed.
    """
    state.tos[op] += 1
    if outcome == OUTCOME_IMPROVED:
        state.tr[op] += l_reward
    elif outcome == OUTCOME_FEASIBLE:
        state.tr[op] += f_reward
    elif outcome == OUTCOME_INFEASIBLE:
        state.tr[op] -= r_penalty
    else:
        raise ValidationError(f"unknown outcome {outcome!r}")

    cat = state.category_of(op)
    ops = state.categories[cat]
    if any(state.tos[o] == 0 for o in ops):
        return False
    means = sorted(
        ((state.tr[o] / state.tos[o], state.tos[o]) for o in ops), reverse=True
    )
    (best_mean, best_n), (runner_mean, runner_n) = means[0], means[1]
    if (
        best_n >= reset_min_samples
        and runner_n >= reset_min_samples
        and best_mean > (1.0 + reset_threshold) * runner_mean
    ):
        for o in ops:
            state.tr[o] = 0.0
            state.tos[o] = 0
        state.resets[cat] += 1
        return True
    return False


def nmcb_values(state: BanditState, category: str) -> dict[str, float]:
    """Normalized mean confidence bound per operator of one category.

    Defined only when every operator has been selected at least once;
    otherwise operators without samples report 0 and the rest are
    normalized over the sampled ones.
    """
    ops = state.categories[category]
    mcb = {op: (state.tr[op] / state.tos[op]) if state.tos[op] else 0.0 for op in ops}
    total = sum(mcb.values())
    if total == 0:
        return {op: 0.0 for op in ops}
    return {op: mcb[op] / total for op in ops}
