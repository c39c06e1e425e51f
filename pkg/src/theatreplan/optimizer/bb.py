"""Depth-first branch-and-bound on top of the simplex engine.

Branches on the most fractional integer variable (ties to the lowest
index), explores the down-branch first, and keeps the best open-node
bound as the reported lower bound.  Stands in for a commercial solver
at desk scale.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import ValidationError
from .model import LinearModel, MipResult
from .simplex import Basis, prepare, solve_lp_warm

INT_TOL = 1e-6
PRUNE_TOL = 1e-7

_INF = float("inf")


@dataclass
class MipLimits:
    """Stopping rules; at least one of them should be finite for big trees.

    incumbent_threshold + grace implement fast feasible-solution
    detection: once an incumbent beats the threshold, the search is
    allowed a grace budget (seconds and/or nodes) before returning it.
    """

    time_limit: Optional[float] = None
    node_limit: Optional[int] = None
    gap_limit_pct: Optional[float] = None
    incumbent_threshold: Optional[float] = None
    grace_seconds: Optional[float] = None
    grace_nodes: Optional[int] = None


@dataclass
class _Node:
    bounds: dict[int, tuple[float, float]]
    parent_bound: float
    depth: int = 0
    warm: Optional[Basis] = None


def solve_mip(
    model: LinearModel,
    limits: Optional[MipLimits] = None,
    initial_incumbent: Optional[tuple[np.ndarray, float]] = None,
    node_callback: Optional[Callable[[int, float, float], None]] = None,
    branch_priority: Optional[dict[int, int]] = None,
    objective_granularity: Optional[float] = None,
    explore_up_first: bool = False,
    node_heuristic: Optional[
        Callable[[np.ndarray], Optional[tuple[np.ndarray, float]]]
    ] = None,
) -> MipResult:
    """Depth-first search, most-fractional branching, down-branch first.

    branch_priority optionally partitions the integer variables into
    classes; higher classes are branched before lower ones (the
    most-fractional rule applies within a class).  The default is the
    plain most-fractional rule over all integer variables.

    objective_granularity g asserts every integer-feasible objective is
    a multiple of g, letting node bounds round up to the lattice.

    explore_up_first dives on the ceil branch before the floor branch;
    on time-indexed set-covering models committing an assignment early
    collapses the shift plateau that down-first diving just re-spreads.
    """
    limits = limits or MipLimits()
    t0 = time.monotonic()
    prep = prepare(model)
    int_vars = model.integer_indices()
    prio = branch_priority or {}

    def sharpen(bound: float) -> float:
        if objective_granularity and np.isfinite(bound):
            g = objective_granularity
            return float(np.ceil(bound / g - 1e-9) * g)
        return bound

    best_x: Optional[np.ndarray] = None
    best_obj = _INF
    if initial_incumbent is not None:
        x0, obj0 = initial_incumbent
        best_x = np.asarray(x0, dtype=float).copy()
        best_obj = float(obj0)

    root, root_basis = solve_lp_warm(prep)
    if root_basis is not None and root_basis.binv is not None:
        # keep a lean copy as the shared fallback start for every node
        root_basis = root_basis.without_binv()
    nodes = 0
    if root.status == "infeasible":
        if best_x is not None:
            return MipResult("optimal", best_x, best_obj, best_obj, 1, time.monotonic() - t0)
        return MipResult("infeasible", None, _INF, _INF, 1, time.monotonic() - t0)
    if root.status != "optimal":
        return MipResult("no-solution", best_x, best_obj, -_INF, 1, time.monotonic() - t0)

    stack: list[_Node] = [_Node({}, root.objective, warm=root_basis)]
    threshold_hit_at: Optional[tuple[float, int]] = None  # (time, nodes)

    def lower_bound() -> float:
        open_bounds = [n.parent_bound for n in stack]
        if not open_bounds:
            return best_obj
        return min(min(open_bounds), best_obj)

    def out_of_budget() -> Optional[str]:
        if limits.time_limit is not None and time.monotonic() - t0 > limits.time_limit:
            return "time-limit"
        if limits.node_limit is not None and nodes >= limits.node_limit:
            return "node-limit"
        if (
            limits.gap_limit_pct is not None
            and best_x is not None
            and best_obj > 0
            and 100.0 * (best_obj - lower_bound()) / best_obj <= limits.gap_limit_pct
        ):
            return "gap-limit"
        if threshold_hit_at is not None:
            t_hit, n_hit = threshold_hit_at
            if limits.grace_seconds is not None and time.monotonic() - t_hit > limits.grace_seconds:
                return "threshold"
            if limits.grace_nodes is not None and nodes - n_hit > limits.grace_nodes:
                return "threshold"
            if limits.grace_seconds is None and limits.grace_nodes is None:
                return "threshold"
        return None

    status = "optimal"
    while stack:
        reason = out_of_budget()
        if reason:
            status = reason if best_x is not None else "no-solution"
            lb = lower_bound()
            return MipResult(status, best_x, best_obj, lb, nodes, time.monotonic() - t0)

        node = stack.pop()
        if sharpen(node.parent_bound) >= best_obj - PRUNE_TOL:
            continue
        sol, basis = solve_lp_warm(
            prep, bounds_override=node.bounds, warm=node.warm, fallback=root_basis
        )
        nodes += 1
        if node_callback is not None:
            node_callback(nodes, best_obj, lower_bound())
        if sol.status == "infeasible":
            continue
        if sol.status != "optimal":
            status = "no-solution"
            continue
        if node_heuristic is not None:
            cand = node_heuristic(sol.x)
            if cand is not None and cand[1] < best_obj - PRUNE_TOL:
                best_x = np.asarray(cand[0], dtype=float).copy()
                best_obj = float(cand[1])
        if sharpen(sol.objective) >= best_obj - PRUNE_TOL:
            continue

        frac_var = -1
        frac_dist = -1.0
        frac_prio = None
        for j in int_vars:
            f = sol.x[j] - np.floor(sol.x[j])
            dist = min(f, 1.0 - f)
            if dist <= INT_TOL:
                continue
            p = prio.get(j, 0)
            if (
                frac_var < 0
                or p > frac_prio
                or (p == frac_prio and dist > frac_dist + 1e-12)
            ):
                frac_var, frac_dist, frac_prio = j, dist, p
        if frac_var < 0:
            # integer feasible
            best_obj = sol.objective
            best_x = sol.x.copy()
            if (
                limits.incumbent_threshold is not None
                and best_obj < limits.incumbent_threshold
                and threshold_hit_at is None
            ):
                threshold_hit_at = (time.monotonic(), nodes)
            continue

        v = model.variables[frac_var]
        lo, hi = node.bounds.get(frac_var, (v.lower, v.upper))
        xv = sol.x[frac_var]
        down = dict(node.bounds)
        down[frac_var] = (lo, float(np.floor(xv)))
        up = dict(node.bounds)
        up[frac_var] = (float(np.ceil(xv)), hi)
        # LIFO push: the branch explored first goes on top and keeps the
        # dense inverse for its warm start
        lean = basis.without_binv() if basis is not None else None
        first, second = (up, down) if explore_up_first else (down, up)
        stack.append(_Node(second, sol.objective, node.depth + 1, lean))
        stack.append(_Node(first, sol.objective, node.depth + 1, basis))

    wall = time.monotonic() - t0
    if best_x is None:
        return MipResult("infeasible", None, _INF, _INF, nodes, wall)
    return MipResult("optimal", best_x, best_obj, best_obj, nodes, wall)
