"""End-to-end solve entry points shared by the CLI and the service."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .colgen import CgParams, CgResult, ColumnPool, solve_cg
from .compact import solve_compact
from .core import Instance, Schedule, evaluate, recover_rooms
from .errors import NoSolutionError
from .heuristics import PRIORITY_RULES, priority_rule_schedule
from .optimizer import MipLimits
from .rga import RgaParams, RgaResult, run_rga

METHODS = ("pmiorps", "miorps", "cg", "rga", "bc") + PRIORITY_RULES


@dataclass
class SolveOutcome:
    method: str
    schedule: Optional[Schedule]
    status: str
    detail: dict


def solve_rga_cg(
    instance: Instance,
    rga_params: Optional[RgaParams] = None,
    cg_params: Optional[CgParams] = None,
) -> tuple[Optional[Schedule], CgResult, RgaResult]:
    """The hybrid pipeline: GA seeds the pool, CG refines the bound,
    the integer master returns the final schedule."""
    pool = ColumnPool()
    rga_result = run_rga(
        instance, rga_params, column_sink=lambda s: pool.add_from_schedule(s, instance)
    )
    if rga_result.status != "ok":
        raise NoSolutionError(f"initial column generator failed: {rga_result.diagnostics}")
    cg_result = solve_cg(
        instance, pool, cg_params, warm_schedule=rga_result.best_schedule
    )
    best = cg_result.best_schedule
    if best is None or (
        rga_result.best_fitness is not None
        and float(rga_result.best_fitness) < cg_result.upper_bound - 1e-9
    ):
        best = rga_result.best_schedule
    return best, cg_result, rga_result


def solve_with_method(
    instance: Instance,
    method: str,
    *,
    seed: int = 0,
    time_limit: Optional[float] = None,
    rga_params: Optional[RgaParams] = None,
    cg_params: Optional[CgParams] = None,
    mip_limits: Optional[MipLimits] = None,
) -> SolveOutcome:
    """Uniform front door for every solve method the CLI exposes."""
    method = method.lower().replace("-", "_")
    if method in ("pmiorps", "miorps"):
        import numpy as np

        from .heuristics import first_fit_decode, sorted_initial_lists

        limits = mip_limits or MipLimits(time_limit=time_limit)
        mand, elec = sorted_initial_lists(instance, np.random.default_rng(seed))
        dec = first_fit_decode(mand, elec, instance)
        warm = dec.schedule if dec.ok else None
        schedule, result = solve_compact(instance, method, limits, warm_schedule=warm)
        status = "ok" if schedule is not None else "no-solution"
        detail = {
            "mip_status": result.status,
            "lower_bound": result.lower_bound,
            "upper_bound": result.upper_bound,
            "gap_pct": result.gap_pct,
            "nodes": result.nodes,
        }
        return SolveOutcome(method, schedule, status, detail)
    if method == "rga":
        params = rga_params or RgaParams(seed=seed, time_limit=time_limit)
        result = run_rga(instance, params)
        schedule = result.best_schedule
        if schedule is not None:
            schedule = recover_rooms(schedule, instance)
        return SolveOutcome(
            method,
            schedule,
            "ok" if result.status == "ok" else "no-solution",
            {
                "evaluations": result.stats.evaluations,
                "nmcb": result.stats.nmcb,
                "diagnostics": result.diagnostics,
            },
        )
    if method == "cg":
        rp = rga_params or RgaParams(seed=seed, time_limit=None)
        cp = cg_params or CgParams(time_limit=time_limit)
        schedule, cg_result, rga_result = solve_rga_cg(instance, rp, cp)
        if schedule is not None:
            schedule = recover_rooms(schedule, instance)
        return SolveOutcome(
            method,
            schedule,
            cg_result.status if schedule is None else "ok",
            {
                "lower_bound": cg_result.lower_bound,
                "lb_exact": cg_result.lb_exact,
                "upper_bound": cg_result.upper_bound,
                "iterations": cg_result.iterations,
                "columns": cg_result.columns_generated,
                "rga_best": float(rga_result.best_fitness)
                if rga_result.best_fitness is not None
                else None,
            },
        )
    if method == "bc":
        from .branch_check import BcParams, solve_bc

        schedule, stats = solve_bc(
            instance, BcParams(time_limit=time_limit)
        )
        return SolveOutcome(
            method,
            schedule,
            "ok" if schedule is not None else "no-solution",
            stats.as_dict(),
        )
    if method in PRIORITY_RULES:
        try:
            schedule = priority_rule_schedule(method, instance)
        except NoSolutionError as exc:
            return SolveOutcome(method, None, "no-solution", {"reason": str(exc)})
        return SolveOutcome(method, recover_rooms(schedule, instance), "ok", {})
    raise ValueError(f"unknown method {method!r}")
