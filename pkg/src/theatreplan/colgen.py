"""Column generation: set-covering master over daily patterns, per-day
pricing MIPs with fast feasible-column detection, and the integer
master finish.

A column is one feasible single-day pattern (timed surgery set plus a
room count).  The restricted master picks at most one pattern per day
to cover every mandatory surgery, postponing electives at a price;
pricing searches day by day for patterns with negative reduced cost.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .core import (
    Assignment,
    Instance,
    Schedule,
    evaluate,
    max_concurrency,
    overtime_cost,
)
from .errors import FormatError, TheatrePlanError, ValidationError
from .instances import instance_hash
from .money import Money, as_money, money_repr
from .optimizer import (
    EQUAL,
    GREATER,
    LESS,
    LinearModel,
    LpSolution,
    MipLimits,
    solve_lp,
    solve_mip,
)

RC_TOL = 1e-6

POOL_FORMAT = "theatreplan-columns"
POOL_VERSION = 1


@dataclass(frozen=True)
class Column:
    day: int
    placements: frozenset[tuple[int, int]]  # (surgery id, start slot)
    rooms_used: int
    cost: Money

    def covered(self) -> frozenset[int]:
        return frozenset(sid for sid, _ in self.placements)

    def key(self) -> tuple:
        return (self.day, tuple(sorted(self.placements)))


def make_column(day: int, placements, instance: Instance) -> Column:
    """Canonical column: minimal room count, cost recomputed from scratch."""
    placements = frozenset((int(s), int(t)) for s, t in placements)
    rooms = max_concurrency(
        [(t, instance.surgery(s).duration) for s, t in placements],
        instance.total_slots,
    )
    cost = instance.costs.or_open_cost * rooms
    for sid, t in placements:
        cost += overtime_cost(
            t,
            instance.surgery(sid).duration,
            instance.regular_slots,
            instance.costs.overtime_slot_cost,
        )
    return Column(day, placements, rooms, cost)


def column_feasible(col: Column, instance: Instance) -> bool:
    """Single-day feasibility: room cap, surgeon overlap, availability,
    window fit and due dates."""
    if not 1 <= col.day <= instance.num_days:
        return False
    if col.rooms_used > instance.rooms_per_day[col.day - 1]:
        return False
    total = instance.total_slots
    peak = max_concurrency(
        [(t, instance.surgery(s).duration) for s, t in col.placements], total
    )
    if peak > col.rooms_used:
        return False
    used: dict[int, int] = {}
    busy: dict[int, list[int]] = {}
    seen: set[int] = set()
    for sid, t in col.placements:
        s = instance.surgery(sid)
        if sid in seen:
            return False
        seen.add(sid)
        if col.day > s.due_day:
            return False
        if t < 0 or t + s.duration > total:
            return False
        slots = busy.setdefault(s.surgeon, [0] * total)
        for j in range(t, t + s.duration):
            if slots[j]:
                return False
            slots[j] = 1
        used[s.surgeon] = used.get(s.surgeon, 0) + s.duration
    for surgeon, u in used.items():
        if u > instance.availability(surgeon, col.day):
            return False
    return True


class ColumnPool:
    """Duplicate-free, insertion-ordered store of daily patterns."""

    def __init__(self):
        self._columns: dict[tuple, Column] = {}

    def __len__(self) -> int:
        return len(self._columns)

    def __iter__(self):
        return iter(self._columns.values())

    def add(self, col: Column) -> bool:
        key = col.key()
        if key in self._columns:
            return False
        self._columns[key] = col
        return True

    def add_from_schedule(self, schedule: Schedule, instance: Instance) -> int:
        added = 0
        for col in columns_from_schedule(schedule, instance):
            if self.add(col):
                added += 1
        return added

    def by_day(self, day: int) -> list[Column]:
        return [c for c in self if c.day == day]

    def covering(self, sid: int) -> list[Column]:
        return [c for c in self if sid in c.covered()]

    # -- persistence -----------------------------------------------------

    def to_dict(self, instance: Optional[Instance] = None) -> dict:
        return {
            "format": POOL_FORMAT,
            "version": POOL_VERSION,
            "instance_hash": instance_hash(instance) if instance else None,
            "columns": [
                {"day": c.day, "placements": sorted(c.placements)} for c in self
            ],
        }

    def save(self, path, instance: Optional[Instance] = None) -> None:
        Path(path).write_text(json.dumps(self.to_dict(instance)) + "\n")

    @classmethod
    def load(cls, path, instance: Instance) -> "ColumnPool":
        data = json.loads(Path(path).read_text())
        if data.get("format") != POOL_FORMAT:
            raise FormatError("not a column pool file")
        if data.get("version") != POOL_VERSION:
            raise FormatError(f"unsupported pool version {data.get('version')}")
        if data.get("instance_hash") and data["instance_hash"] != instance_hash(instance):
            raise FormatError("column pool does not reference this instance")
        pool = cls()
        for c in data["columns"]:
            pool.add(make_column(c["day"], c["placements"], instance))
        return pool


def columns_from_schedule(schedule: Schedule, instance: Instance) -> list[Column]:
    """Slice a feasible schedule into one column per non-empty day."""
    per_day: dict[int, list[tuple[int, int]]] = {}
    for sid, a in schedule.assignments.items():
        per_day.setdefault(a.day, []).append((sid, a.start))
    return [
        make_column(day, placements, instance)
        for day, placements in sorted(per_day.items())
    ]


@dataclass
class DualPrices:
    pi1: dict[int, float]  # mandatory coverage rows
    pi2: dict[int, float]  # elective coverage rows
    pi3: dict[int, float]  # day convexity rows

    def surgery_price(self, sid: int) -> float:
        if sid in self.pi1:
            return self.pi1[sid]
        return self.pi2.get(sid, 0.0)


def reduced_cost(col: Column, duals: DualPrices) -> float:
    value = float(col.cost)
    for sid in col.covered():
        value -= duals.surgery_price(sid)
    value -= duals.pi3.get(col.day, 0.0)
    return value


@dataclass
class _MasterModel:
    model: LinearModel
    columns: list[Column]
    x_vars: list[int]
    z_vars: dict[int, int]
    art_vars: dict[int, int]
    mand_rows: dict[int, int]
    elec_rows: dict[int, int]
    day_rows: dict[int, int]


def _artificial_cost(instance: Instance) -> float:
    return 10.0 * float(
        instance.costs.or_open_cost * sum(instance.rooms_per_day)
        + instance.costs.postponement_cost * len(instance.elective_ids)
    )


def build_master(pool: ColumnPool, instance: Instance, integer: bool) -> _MasterModel:
    model = LinearModel()
    columns = list(pool)
    x_vars = [
        model.add_variable(f"x{k}", 0, 1, is_integer=integer, obj=float(c.cost))
        for k, c in enumerate(columns)
    ]
    z_vars = {
        i: model.add_variable(
            f"z{i}", 0, 1, is_integer=integer,
            obj=float(instance.costs.postponement_cost),
        )
        for i in instance.elective_ids
    }
    big = _artificial_cost(instance)
    art_vars = {
        i: model.add_variable(f"a{i}", 0, 1, obj=big) for i in instance.mandatory_ids
    }
    mand_rows = {}
    elec_rows = {}
    day_rows = {}
    cover: dict[int, list[int]] = {}
    for k, c in enumerate(columns):
        for sid in c.covered():
            cover.setdefault(sid, []).append(k)
    for i in instance.mandatory_ids:
        row = [(x_vars[k], 1.0) for k in cover.get(i, [])]
        row.append((art_vars[i], 1.0))
        mand_rows[i] = model.add_constraint(row, GREATER, 1.0, name=f"mand_{i}")
    for i in instance.elective_ids:
        row = [(x_vars[k], 1.0) for k in cover.get(i, [])]
        row.append((z_vars[i], 1.0))
        elec_rows[i] = model.add_constraint(row, GREATER, 1.0, name=f"elec_{i}")
    for d in range(1, instance.num_days + 1):
        row = [(x_vars[k], 1.0) for k, c in enumerate(columns) if c.day == d]
        day_rows[d] = model.add_constraint(row, LESS, 1.0, name=f"day_{d}")
    return _MasterModel(
        model, columns, x_vars, z_vars, art_vars, mand_rows, elec_rows, day_rows
    )


def solve_restricted_master_lp(
    pool: ColumnPool, instance: Instance
) -> tuple[LpSolution, DualPrices]:
    """LP relaxation of the restricted master plus its dual prices."""
    master = build_master(pool, instance, integer=False)
    sol = solve_lp(master.model)
    if sol.status != "optimal":
        raise TheatrePlanError(f"master LP unexpectedly {sol.status}")
    duals = DualPrices(
        pi1={i: float(sol.duals[r]) for i, r in master.mand_rows.items()},
        pi2={i: float(sol.duals[r]) for i, r in master.elec_rows.items()},
        pi3={d: float(sol.duals[r]) for d, r in master.day_rows.items()},
    )
    return sol, duals


@dataclass
class PricingLimits:
    """Fast feasible-column detection: once an incumbent prices out
    negative, the search gets a small grace budget before returning it."""

    incumbent_grace_seconds: Optional[float] = 10.0
    incumbent_grace_nodes: Optional[int] = None
    hard_seconds: Optional[float] = None
    hard_nodes: Optional[int] = None


@dataclass
class PricingResult:
    columns: list[Column]
    proved: bool  # True when 'no negative column' was established exactly


def build_pricing_model(
    day: int,
    duals: DualPrices,
    instance: Instance,
    exclude: Sequence[frozenset[tuple[int, int]]] = (),
) -> tuple[LinearModel, dict, int]:
    """Day-restricted pricing MIP.

    `exclude` lists placement sets already pooled for this day; a
    no-good row per set keeps the search away from columns the master
    already owns (a pooled column at its upper bound can price
    negative without being addable).
    """
    model = LinearModel()
    x_index: dict[tuple[int, int], int] = {}
    costs = instance.costs
    total = instance.total_slots
    eligible = [s for s in instance.surgeries if day <= s.due_day]
    for s in eligible:
        price = duals.surgery_price(s.id)
        for t in instance.start_slots(s.id):
            c_it = float(
                overtime_cost(t, s.duration, instance.regular_slots, costs.overtime_slot_cost)
            )
            x_index[(s.id, t)] = model.add_variable(
                f"x_{s.id}_{t}", 0, 1, is_integer=True, obj=c_it - price
            )
    cap = instance.rooms_per_day[day - 1]
    y_var = model.add_variable("y", 0, cap, is_integer=True, obj=float(costs.or_open_cost))

    for s in eligible:
        row = [(x_index[(s.id, t)], 1.0) for t in instance.start_slots(s.id)]
        model.add_constraint(row, LESS, 1.0, name=f"once_{s.id}")
    for t in range(total):
        row = []
        for s in eligible:
            lo = max(t - s.duration + 1, 0)
            for tp in range(lo, t + 1):
                if (s.id, tp) in x_index:
                    row.append((x_index[(s.id, tp)], 1.0))
        row.append((y_var, -1.0))
        model.add_constraint(row, LESS, 0.0, name=f"conc_{t}")
    surgeons = {}
    for s in eligible:
        surgeons.setdefault(s.surgeon, []).append(s)
    for l, mine in sorted(surgeons.items()):
        for t in range(total):
            row = []
            candidates = 0
            for s in mine:
                lo = max(t - s.duration + 1, 0)
                starts = [tp for tp in range(lo, t + 1) if (s.id, tp) in x_index]
                if starts:
                    candidates += 1
                row.extend((x_index[(s.id, tp)], 1.0) for tp in starts)
            if candidates >= 2:
                model.add_constraint(row, LESS, 1.0, name=f"surg_{l}_{t}")
        row = [
            (x_index[(s.id, t)], float(s.duration))
            for s in mine
            for t in instance.start_slots(s.id)
        ]
        if row:
            model.add_constraint(
                row, LESS, float(instance.availability(l, day)), name=f"avail_{l}"
            )
    for n, pattern in enumerate(exclude):
        row = [
            (pos, 1.0 if key in pattern else -1.0) for key, pos in x_index.items()
        ]
        model.add_constraint(
            row, LESS, float(len(pattern) - 1), name=f"nogood_{n}"
        )
    return model, x_index, y_var


def left_shift_placements(
    placements: Sequence[tuple[int, int]], instance: Instance
) -> list[tuple[int, int]]:
    """Canonicalize a day pattern: re-place each surgery (in original
    start order) at the earliest slot that keeps the peak room count
    and surgeon disjointness.  Never increases cost."""
    total = instance.total_slots
    peak = max_concurrency(
        [(t, instance.surgery(s).duration) for s, t in placements], total
    )
    ongoing = [0] * total
    busy: dict[int, list[bool]] = {}
    out = []
    for _, sid in sorted((t, s) for s, t in placements):
        s = instance.surgery(sid)
        slots = busy.setdefault(s.surgeon, [False] * total)
        t = 0
        while True:
            j = t
            hit = -1
            while j < t + s.duration:
                if ongoing[j] >= peak or slots[j]:
                    hit = j
                    break
                j += 1
            if hit < 0:
                break
            t = hit + 1
        for j in range(t, t + s.duration):
            ongoing[j] += 1
            slots[j] = True
        out.append((sid, t))
    return out


def price_day(
    day: int,
    duals: DualPrices,
    instance: Instance,
    limits: Optional[PricingLimits] = None,
    pool: Optional[ColumnPool] = None,
) -> PricingResult:
    """Search day `day` for a pattern with negative reduced cost.

    Returns the incumbent column once it prices negative (after the
    grace budget), or an empty result; `proved` reports whether 'no
    column exists' was established rather than timed out.  Patterns
    already pooled for this day are excluded from the search.
    """
    limits = limits or PricingLimits()
    exclude = (
        [c.placements for c in pool.by_day(day)] if pool is not None else []
    )
    model, x_index, y_var = build_pricing_model(day, duals, instance, exclude)
    offset = -duals.pi3.get(day, 0.0)  # constant part of the reduced cost
    threshold = -RC_TOL - offset  # model value below this => negative reduced cost
    mip_limits = MipLimits(
        time_limit=limits.hard_seconds,
        node_limit=limits.hard_nodes,
        incumbent_threshold=threshold,
        grace_seconds=limits.incumbent_grace_seconds,
        grace_nodes=limits.incumbent_grace_nodes,
    )
    priority = {y_var: 1}
    result = solve_mip(
        model, mip_limits, branch_priority=priority, explore_up_first=True
    )

    if result.has_solution and result.upper_bound + offset < -RC_TOL:
        placements = [key for key, pos in x_index.items() if result.x[pos] > 0.5]
        shifted = left_shift_placements(placements, instance)
        col = make_column(day, shifted, instance)
        if pool is not None and col.key() in {c.key() for c in pool.by_day(day)}:
            # the canonical form is already pooled; keep the raw timing,
            # which the no-goods guarantee is new
            col = make_column(day, placements, instance)
        return PricingResult([col], proved=result.status == "optimal")
    proved = result.status in ("optimal", "infeasible")
    return PricingResult([], proved=proved)


@dataclass
class CgResult:
    status: str
    lower_bound: float
    lb_exact: bool
    upper_bound: float
    best_schedule: Optional[Schedule]
    iterations: int
    columns_generated: int
    lp_history: list[float] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)


@dataclass
class CgParams:
    time_limit: Optional[float] = None
    max_iterations: int = 200
    ip_time_limit: Optional[float] = 60.0
    ip_node_limit: Optional[int] = None
    pricing: PricingLimits = field(default_factory=PricingLimits)


def _incumbent_from_schedule(
    schedule: Schedule, master: _MasterModel, instance: Instance
) -> Optional[tuple[np.ndarray, float]]:
    """Express a schedule as a master-variable point, if its per-day
    columns are all pooled."""
    want = {c.key(): c for c in columns_from_schedule(schedule, instance)}
    x = np.zeros(master.model.num_variables)
    chosen_days = set()
    for k, col in enumerate(master.columns):
        if col.key() in want:
            x[master.x_vars[k]] = 1.0
            chosen_days.add(col.day)
            del want[col.key()]
    if want:
        return None
    covered = set()
    for k, col in enumerate(master.columns):
        if x[master.x_vars[k]] > 0.5:
            covered |= col.covered()
    for i, var in master.z_vars.items():
        if i not in covered:
            x[var] = 1.0
    obj = float(sum(master.model.variables[j].obj * x[j] for j in range(len(x))))
    return x, obj


def decode_master_selection(
    x: np.ndarray, master: _MasterModel, instance: Instance
) -> Schedule:
    """Turn selected columns into a schedule; a surgery covered twice
    keeps its earliest-day occurrence (never increases cost)."""
    selected = [
        master.columns[k] for k in range(len(master.columns))
        if x[master.x_vars[k]] > 0.5
    ]
    selected.sort(key=lambda c: c.day)
    assignments: dict[int, Assignment] = {}
    per_day: dict[int, list[tuple[int, int]]] = {}
    for col in selected:
        for sid, t in sorted(col.placements):
            if sid in assignments:
                continue  # over-coverage: keep the earlier day
            assignments[sid] = Assignment(col.day, t)
            per_day.setdefault(col.day, []).append((sid, t))
    rooms_open = {d: 0 for d in range(1, instance.num_days + 1)}
    for day, placements in per_day.items():
        rooms_open[day] = max_concurrency(
            [(t, instance.surgery(s).duration) for s, t in placements],
            instance.total_slots,
        )
    postponed = frozenset(set(instance.elective_ids) - set(assignments))
    schedule = Schedule(assignments, postponed, rooms_open)
    return schedule.with_costs(evaluate(schedule, instance))


def solve_cg(
    instance: Instance,
    initial_pool: ColumnPool,
    params: Optional[CgParams] = None,
    warm_schedule: Optional[Schedule] = None,
) -> CgResult:
    """Master-pricing loop, then the integer master over the full pool."""
    params = params or CgParams()
    if len(initial_pool) == 0 and warm_schedule is None:
        raise ValidationError("column generation needs a non-empty initial pool")
    pool = initial_pool
    if warm_schedule is not None:
        pool.add_from_schedule(warm_schedule, instance)

    t0 = time.monotonic()
    lp_history: list[float] = []
    iterations = 0
    generated = 0
    lb_exact = False
    duals = None
    t_pricing = 0.0

    while True:
        sol, duals = solve_restricted_master_lp(pool, instance)
        lp_history.append(sol.objective)
        if params.time_limit is not None and time.monotonic() - t0 > params.time_limit:
            break
        if iterations >= params.max_iterations:
            break
        added = 0
        all_proved = True
        tp = time.monotonic()
        for d in range(1, instance.num_days + 1):
            res = price_day(d, duals, instance, params.pricing, pool=pool)
            if res.columns:
                for col in res.columns:
                    if pool.add(col):
                        added += 1
                        generated += 1
                all_proved = False  # a new column means we have not proved out
            elif not res.proved:
                all_proved = False
        t_pricing += time.monotonic() - tp
        if added == 0:
            lb_exact = all_proved
            break
        iterations += 1

    lower_bound = lp_history[-1] if lp_history else float("-inf")
    t_cg = time.monotonic() - t0

    # integer master over the full pool
    t1 = time.monotonic()
    master = build_master(pool, instance, integer=True)
    incumbent = None
    if warm_schedule is not None:
        incumbent = _incumbent_from_schedule(warm_schedule, master, instance)
    from .compact import cost_granularity

    ip = solve_mip(
        master.model,
        MipLimits(time_limit=params.ip_time_limit, node_limit=params.ip_node_limit),
        initial_incumbent=incumbent,
        objective_granularity=cost_granularity(instance),
        explore_up_first=True,
    )
    t_ip = time.monotonic() - t1
    if not ip.has_solution or any(
        ip.x[var] > 0.5 for var in master.art_vars.values()
    ):
        # an active artificial means some mandatory surgery is uncovered
        # by every pooled column; no usable schedule exists yet
        return CgResult(
            "no-solution", lower_bound, lb_exact, float("inf"), None,
            iterations, generated, lp_history,
            {"cg": t_cg, "pricing": t_pricing, "ip": t_ip},
        )
    schedule = decode_master_selection(ip.x, master, instance)
    ub = float(schedule.cost_breakdown.total)
    return CgResult(
        "ok", lower_bound, lb_exact, ub, schedule, iterations, generated,
        lp_history, {"cg": t_cg, "pricing": t_pricing, "ip": t_ip},
    )
