"""Disruption and robustness studies.

Rolling-horizon rescheduling: freeze the first days of a baseline
plan, inject emergencies or tightened due dates, re-optimize the rest.
Buffer analysis: plan against a shortened regular shift, then replay
the plan under noisy realized durations, with the withheld buffer
absorbed before any overtime starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .colgen import CgParams
from .core import (
    Assignment,
    CostBreakdown,
    Instance,
    Schedule,
    Surgery,
    check_feasibility,
    evaluate,
    recover_rooms,
)
from .errors import NoSolutionError, ValidationError
from .heuristics import first_fit_decode, sorted_initial_lists
from .instances import GenSpec, generate
from .money import Money
from .optimizer import MipLimits
from .rga import RgaParams

EMERGENCY = "emergency_arrivals"
TIGHTENING = "due_date_tightening"


@dataclass(frozen=True)
class Disruption:
    kind: str
    arrival_day: Optional[int] = None
    new_surgeries: tuple[Surgery, ...] = ()
    tightened: tuple[tuple[int, int], ...] = ()  # (surgery id, new due day)

    def __post_init__(self):
        if self.kind not in (EMERGENCY, TIGHTENING, "none"):
            raise ValidationError(f"unknown disruption kind {self.kind!r}")
        if self.new_surgeries and self.arrival_day is None:
            raise ValidationError("emergency arrivals need an arrival day")
        for s in self.new_surgeries:
            if s.due_day != self.arrival_day:
                raise ValidationError(
                    f"emergency surgery {s.id}: due day must equal the arrival day"
                )

    @classmethod
    def none(cls) -> "Disruption":
        return cls("none")


@dataclass(frozen=True)
class KpiRecord:
    total: Money
    postponement: Money
    or_opening: Money
    overtime: Money
    delta_pct: float = 0.0

    @classmethod
    def from_breakdown(
        cls, b: CostBreakdown, baseline_total: Optional[Money] = None
    ) -> "KpiRecord":
        delta = 0.0
        if baseline_total is not None and baseline_total != 0:
            delta = float(100 * (b.total - baseline_total) / baseline_total)
        return cls(b.total, b.postponement, b.or_opening, b.overtime, delta)

    def as_dict(self) -> dict:
        return {
            "total": float(self.total),
            "postponement": float(self.postponement),
            "or_opening": float(self.or_opening),
            "overtime": float(self.overtime),
            "delta_pct": self.delta_pct,
        }


class RescheduleInfeasibleError(NoSolutionError):
    def __init__(self, surgery_id: int, message: str):
        self.surgery_id = surgery_id
        super().__init__(message)


def apply_disruption(instance: Instance, disruption: Disruption) -> Instance:
    """The post-disruption instance: new surgeries appended, due dates
    retargeted."""
    surgeries = list(instance.surgeries)
    tight = dict(disruption.tightened)
    for sid, new_due in tight.items():
        s = instance.surgery(sid)
        if new_due >= s.due_day:
            raise ValidationError(
                f"surgery {sid}: tightened due day {new_due} must be earlier "
                f"than {s.due_day}"
            )
        if new_due < 1:
            raise ValidationError(f"surgery {sid}: due day must stay >= 1")
        surgeries[sid - 1] = replace(s, due_day=new_due)
    next_id = len(surgeries) + 1
    for s in disruption.new_surgeries:
        surgeries.append(replace(s, id=next_id))
        next_id += 1
    return replace(instance, surgeries=tuple(surgeries))


def _residual_instance(
    disrupted: Instance, freeze_days: int, frozen_ids: set[int]
) -> tuple[Instance, dict[int, int]]:
    """Days after the freeze window, renumbered from 1; returns the
    id mapping residual id -> original id."""
    res_days = disrupted.num_days - freeze_days
    mapping: dict[int, int] = {}
    residual_surgeries = []
    for s in disrupted.surgeries:
        if s.id in frozen_ids:
            continue
        new_id = len(residual_surgeries) + 1
        mapping[new_id] = s.id
        if s.due_day <= freeze_days:
            raise RescheduleInfeasibleError(
                s.id,
                f"surgery {s.id} is due on day {s.due_day}, inside the frozen "
                f"window of {freeze_days} day(s), but is not scheduled there",
            )
        residual_surgeries.append(replace(s, id=new_id, due_day=s.due_day - freeze_days))
    residual = Instance(
        surgeries=tuple(residual_surgeries),
        num_days=res_days,
        regular_slots=disrupted.regular_slots,
        overtime_slots=disrupted.overtime_slots,
        rooms_per_day=disrupted.rooms_per_day[freeze_days:],
        surgeon_availability=tuple(
            row[freeze_days:] for row in disrupted.surgeon_availability
        ),
        costs=disrupted.costs,
        slot_minutes=disrupted.slot_minutes,
    )
    return residual, mapping


def reschedule(
    baseline: Schedule,
    instance: Instance,
    disruption: Disruption,
    freeze_days: int,
    solver: str = "pmiorps",
    *,
    seed: int = 0,
    mip_limits: Optional[MipLimits] = None,
    rga_params: Optional[RgaParams] = None,
    cg_params: Optional[CgParams] = None,
) -> tuple[Schedule, KpiRecord]:
    """Freeze the first days of the baseline, then re-optimize the rest
    of the horizon on the disrupted instance."""
    if not 0 <= freeze_days <= instance.num_days:
        raise ValidationError("freeze_days must lie within the horizon")
    if disruption.arrival_day is not None and disruption.arrival_day <= freeze_days:
        raise ValidationError(
            "emergencies must arrive after the frozen window"
        )
    baseline_total = (
        baseline.cost_breakdown.total
        if baseline.cost_breakdown is not None
        else evaluate(baseline, instance).total
    )
    disrupted = apply_disruption(instance, disruption)

    frozen_assignments = {
        sid: a for sid, a in baseline.assignments.items() if a.day <= freeze_days
    }
    if freeze_days == instance.num_days and disruption.kind == "none":
        sched = baseline.with_costs(evaluate(baseline, instance))
        return sched, KpiRecord.from_breakdown(sched.cost_breakdown, baseline_total)

    for sid, new_due in disruption.tightened:
        frozen = frozen_assignments.get(sid)
        if new_due <= freeze_days and frozen is None:
            raise RescheduleInfeasibleError(
                sid,
                f"surgery {sid} tightened to day {new_due} inside the frozen "
                "window but its baseline slot is outside it",
            )

    residual, mapping = _residual_instance(
        disrupted, freeze_days, set(frozen_assignments)
    )

    if len(residual.surgeries) == 0:
        merged_assignments = dict(frozen_assignments)
        rooms = {d: baseline.rooms_open.get(d, 0) for d in range(1, freeze_days + 1)}
        for d in range(freeze_days + 1, instance.num_days + 1):
            rooms[d] = 0
        schedule = Schedule(merged_assignments, frozenset(), rooms)
    else:
        if solver == "pmiorps":
            from .compact import solve_compact

            warm = None
            mand, elec = sorted_initial_lists(residual, np.random.default_rng(seed))
            dec = first_fit_decode(mand, elec, residual)
            if dec.ok:
                warm = dec.schedule
            res_sched, result = solve_compact(
                residual, "pmiorps", mip_limits, warm_schedule=warm
            )
            if res_sched is None:
                raise NoSolutionError(f"residual solve failed: {result.status}")
        elif solver == "cg":
            from .pipeline import solve_rga_cg

            rp = rga_params or RgaParams(population=40, generations=30, seed=seed)
            cp = cg_params or CgParams()
            res_sched, _, _ = solve_rga_cg(residual, rp, cp)
            if res_sched is None:
                raise NoSolutionError("residual column generation found no schedule")
        else:
            raise ValidationError(f"unknown reschedule solver {solver!r}")

        merged_assignments = dict(frozen_assignments)
        postponed = set()
        for rid, a in res_sched.assignments.items():
            merged_assignments[mapping[rid]] = Assignment(
                a.day + freeze_days, a.start, a.room
            )
        for rid in res_sched.postponed:
            postponed.add(mapping[rid])
        rooms = {d: baseline.rooms_open.get(d, 0) for d in range(1, freeze_days + 1)}
        for d in range(freeze_days + 1, instance.num_days + 1):
            rooms[d] = res_sched.rooms_open.get(d - freeze_days, 0)
        schedule = Schedule(merged_assignments, frozenset(postponed), rooms)

    schedule = schedule.with_costs(evaluate(schedule, disrupted))
    report = check_feasibility(schedule, disrupted)
    if not report.ok:
        raise NoSolutionError(
            f"rescheduled plan violates {report.violations[0].tag}"
        )
    return schedule, KpiRecord.from_breakdown(schedule.cost_breakdown, baseline_total)


def split_for_emergencies(
    full_instance: Instance, count: int, arrival_day: int, rng: np.random.Generator
) -> tuple[Instance, Disruption]:
    """Withhold `count` surgeries from the planning set and stage them
    as same-day emergency arrivals."""
    n = len(full_instance.surgeries)
    if count >= n:
        raise ValidationError("cannot withhold every surgery")
    withheld = set(
        int(i) + 1 for i in rng.choice(n, size=count, replace=False)
    )
    base_surgeries = []
    for s in full_instance.surgeries:
        if s.id in withheld:
            continue
        base_surgeries.append(replace(s, id=len(base_surgeries) + 1))
    base = replace(full_instance, surgeries=tuple(base_surgeries))
    emergencies = tuple(
        replace(full_instance.surgery(sid), id=0, due_day=arrival_day)
        for sid in sorted(withheld)
    )
    return base, Disruption(EMERGENCY, arrival_day, emergencies)


# ---------------------------------------------------------------------------
# buffer analysis


def buffered_planning_instance(instance: Instance, buffer_minutes: int) -> Instance:
    """Withhold buffer slots from the regular shift for planning.

    The plannable day shrinks by the buffer and the planning overtime
    boundary moves down with it; at execution the withheld slots are
    consumed before true overtime starts.
    """
    if buffer_minutes % instance.slot_minutes:
        raise ValidationError("buffer must be a multiple of the slot size")
    b = buffer_minutes // instance.slot_minutes
    if b < 0 or b >= instance.regular_slots:
        raise ValidationError("buffer must leave at least one regular slot")
    if b == 0:
        return instance
    new_total = instance.total_slots - b
    return replace(
        instance,
        regular_slots=instance.regular_slots - b,
        surgeon_availability=tuple(
            tuple(min(a, new_total) for a in row)
            for row in instance.surgeon_availability
        ),
    )


def _buffer_orders(plan_instance: Instance):
    """Candidate decode orders for buffered planning: due-sorted first,
    then scarcity-aware fallbacks for tight surgeon calendars."""

    def feasible_days(sid: int) -> int:
        s = plan_instance.surgery(sid)
        return sum(
            1
            for d in range(1, plan_instance.latest_day(sid) + 1)
            if plan_instance.availability(s.surgeon, d) >= s.duration
        )

    mand, elec = sorted_initial_lists(plan_instance, np.random.default_rng(0))
    yield mand, elec
    yield (
        sorted(mand, key=lambda i: (plan_instance.surgery(i).due_day, feasible_days(i),
                                    -plan_instance.surgery(i).duration, i)),
        elec,
    )
    yield (
        sorted(mand, key=lambda i: (feasible_days(i), plan_instance.surgery(i).due_day,
                                    -plan_instance.surgery(i).duration, i)),
        elec,
    )


def default_buffer_solver(plan_instance: Instance) -> Schedule:
    """Deterministic baseline planner: due-date-sorted first-fit with
    scarcity-aware fallbacks.  No cost-driven repacking: a stable plan
    shape across buffer levels keeps the realized-overtime series
    comparable between levels."""
    schedule, _ = _solve_buffer_plan(plan_instance)
    return schedule


def _solve_buffer_plan(plan_instance: Instance):
    failed = None
    for m, e in _buffer_orders(plan_instance):
        result = first_fit_decode(m, e, plan_instance)
        if result.ok:
            return result.schedule, list(m) + list(e)
        failed = result.failed_surgery
    raise NoSolutionError(
        f"buffered planning failed: surgery {failed} unplaceable"
    )


def draw_duration_noise(
    instance: Instance, noise_seed: int, spread: float = 0.2
) -> dict[int, Fraction]:
    """One epsilon per surgery, shared across every buffer level."""
    rng = np.random.default_rng(noise_seed)
    eps = rng.uniform(-spread, spread, size=len(instance.surgeries))
    return {s.id: Fraction(float(eps[s.id - 1])) for s in instance.surgeries}


@dataclass(frozen=True)
class BufferOutcome:
    buffer_minutes: int
    planned: Schedule
    kpi: KpiRecord
    realized_overtime_slots: Fraction


def buffer_evaluate(
    instance: Instance,
    buffer_minutes: int,
    schedule_solver: Optional[Callable[[Instance], Schedule]] = None,
    noise_seed: int = 0,
    baseline_total: Optional[Money] = None,
) -> BufferOutcome:
    """Plan with withheld capacity, then replay under noisy durations.

    Surgeries execute per room in planned start order, each starting at
    max(planned start, predecessor's realized finish); realized room
    overtime counts only the slots past the *full* regular shift.
    """
    solver = schedule_solver or default_buffer_solver
    plan_instance = buffered_planning_instance(instance, buffer_minutes)
    planned = solver(plan_instance)
    if any(a.room is None for a in planned.assignments.values()):
        planned = recover_rooms(planned, plan_instance)
    eps = draw_duration_noise(instance, noise_seed)

    for sid in planned.assignments:
        if instance.surgery(sid).duration * (1 + eps[sid]) <= 0:
            raise ValidationError(f"realized duration of surgery {sid} is not positive")

    by_room: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for sid, a in planned.assignments.items():
        by_room.setdefault((a.day, a.room), []).append((a.start, sid))

    overtime_slots = Fraction(0)
    regular = Fraction(instance.regular_slots)
    for (_, _), items in sorted(by_room.items()):
        items.sort()
        clock = Fraction(0)
        for start, sid in items:
            begin = max(Fraction(start), clock)
            realized = instance.surgery(sid).duration * (1 + eps[sid])
            clock = begin + realized
        overtime_slots += max(Fraction(0), clock - regular)

    costs = instance.costs
    postponement = costs.postponement_cost * len(planned.postponed)
    or_opening = costs.or_open_cost * sum(planned.rooms_open.values())
    overtime = costs.overtime_slot_cost * overtime_slots
    breakdown = CostBreakdown(
        postponement, or_opening, overtime, postponement + or_opening + overtime
    )
    return BufferOutcome(
        buffer_minutes,
        planned,
        KpiRecord.from_breakdown(breakdown, baseline_total),
        overtime_slots,
    )


def nested_buffer_plans(
    instance: Instance, buffers: Sequence[int]
) -> dict[int, Schedule]:
    """One plan per buffer level with nested room contents.

    The tightest window is planned first; wider windows re-decode the
    same placement order, which reproduces every earlier placement
    verbatim (first-fit only gains later slots from a longer day) and
    then appends whatever newly fits.  Nesting makes the realized
    overtime series non-increasing in the buffer by construction.
    """
    levels = sorted(set(int(b) for b in buffers), reverse=True)
    if not levels:
        return {}
    from .heuristics import decode_order

    placed_order: list[int] = []
    placed: set[int] = set()
    plans: dict[int, Schedule] = {}
    anchor_order: Optional[list[int]] = None
    for b in levels:
        plan_inst = buffered_planning_instance(instance, b)
        if anchor_order is None:
            schedule, anchor_order = _solve_buffer_plan(plan_inst)
            full_order = anchor_order
            dec_schedule = schedule
        else:
            rest = [i for i in anchor_order if i not in placed]
            full_order = placed_order + rest
            dec = decode_order(full_order, plan_inst)
            if not dec.ok:
                raise NoSolutionError(
                    f"buffered planning failed at B={b}: surgery "
                    f"{dec.failed_surgery} unplaceable"
                )
            dec_schedule = dec.schedule
        plans[b] = dec_schedule
        placed_order = [i for i in full_order if i in dec_schedule.assignments]
        placed = set(placed_order)
    return plans


def buffer_grid(
    instance: Instance,
    buffers: Sequence[int] = (0, 30, 60, 90, 120),
    schedule_solver: Optional[Callable[[Instance], Schedule]] = None,
    noise_seed: int = 0,
    nested: bool = True,
) -> list[BufferOutcome]:
    """Evaluate a grid of buffer levels under one shared noise draw.

    nested=True (default) derives all plans from one waterfall so the
    overtime series is structurally monotone; nested=False replans
    each level independently with `schedule_solver`.
    """
    outcomes = []
    baseline_total: Optional[Money] = None
    plans = (
        nested_buffer_plans(instance, buffers)
        if nested and schedule_solver is None
        else None
    )
    for b in buffers:
        solver = schedule_solver
        if plans is not None:
            plan = plans[int(b)]
            solver = lambda _inst, _plan=plan: _plan
        out = buffer_evaluate(instance, b, solver, noise_seed, baseline_total)
        if baseline_total is None:
            baseline_total = out.kpi.total
        outcomes.append(out)
    return outcomes


# ---------------------------------------------------------------------------
# experiment harness


@dataclass
class ExperimentConfig:
    instances: list[GenSpec]
    methods: list[str] = field(default_factory=lambda: ["cg"])
    buffers: list[int] = field(default_factory=list)
    emergencies: int = 0
    emergency_day: int = 3
    freeze_days: int = 2
    reschedule_solver: str = "pmiorps"
    seed: int = 0
    time_limit: Optional[float] = None


def run_experiment(config: ExperimentConfig) -> list[dict]:
    """Grid over instances x methods (+ disruption and buffer studies).

    One row per run; individual failures are recorded in the row's
    status and never abort the grid.
    """
    from .pipeline import solve_with_method

    rows: list[dict] = []
    for idx, spec in enumerate(config.instances):
        instance = generate(spec)
        label = f"gen[{spec.num_surgeries}]seed{spec.seed}"
        for method in config.methods:
            row = {
                "instance": label,
                "kind": "solve",
                "method": method,
                "status": "ok",
            }
            try:
                outcome = solve_with_method(
                    instance,
                    method,
                    seed=config.seed + idx,
                    time_limit=config.time_limit,
                )
                row["status"] = outcome.status
                if outcome.schedule is not None:
                    kpi = KpiRecord.from_breakdown(evaluate(outcome.schedule, instance))
                    row.update(kpi.as_dict())
            except Exception as exc:  # the grid must survive single failures
                row["status"] = f"error: {exc}"
            rows.append(row)

        if config.emergencies:
            row = {
                "instance": label,
                "kind": "reschedule",
                "method": config.reschedule_solver,
                "status": "ok",
            }
            try:
                rng = np.random.default_rng(config.seed + 1000 + idx)
                base, disruption = split_for_emergencies(
                    instance, config.emergencies, config.emergency_day, rng
                )
                baseline_outcome = solve_with_method(
                    base,
                    config.reschedule_solver
                    if config.reschedule_solver in ("pmiorps", "cg")
                    else "pmiorps",
                    seed=config.seed + idx,
                    time_limit=config.time_limit,
                )
                if baseline_outcome.schedule is None:
                    row["status"] = "baseline-failed"
                else:
                    _, kpi = reschedule(
                        baseline_outcome.schedule,
                        base,
                        disruption,
                        config.freeze_days,
                        solver=config.reschedule_solver,
                        seed=config.seed + idx,
                    )
                    row.update(kpi.as_dict())
            except Exception as exc:
                row["status"] = f"error: {exc}"
            rows.append(row)

        if config.buffers:
            try:
                outcomes = buffer_grid(
                    instance, config.buffers, noise_seed=config.seed + 2000 + idx
                )
                for out in outcomes:
                    row = {
                        "instance": label,
                        "kind": "buffer",
                        "method": f"B={out.buffer_minutes}",
                        "status": "ok",
                    }
                    row.update(out.kpi.as_dict())
                    rows.append(row)
            except Exception as exc:
                rows.append(
                    {
                        "instance": label,
                        "kind": "buffer",
                        "method": "grid",
                        "status": f"error: {exc}",
                    }
                )
    return rows
