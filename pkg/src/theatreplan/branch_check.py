"""Logic-based branch-and-check baseline.

A room-assignment master (which day and room each surgery uses, how
much overtime each day budgets) talks to per-day sequencing
subproblems.  Infeasible days come back as no-good cuts, underbudgeted
days as if-then optimality cuts, and the loop converges when every
day's sequencing cost matches the master's estimate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Assignment, Instance, Schedule, evaluate
from .errors import ValidationError
from .optimizer import EQUAL, GREATER, LESS, LinearModel, MipLimits, solve_mip

ALPHA_TOL = 1e-6


@dataclass
class BcParams:
    time_limit: Optional[float] = None
    max_iterations: int = 200
    master_limits: Optional[MipLimits] = None
    subproblem_limits: Optional[MipLimits] = None
    # per_surgery charges exactly the slots each surgery spends past the
    # regular boundary (the planning objective); room_makespan charges
    # each room's overrun, the printed subproblem form
    overtime_mode: str = "per_surgery"
    allow_subproblem_postponement: bool = False

    def __post_init__(self):
        if self.overtime_mode not in ("per_surgery", "room_makespan"):
            raise ValidationError("overtime_mode must be per_surgery or room_makespan")


@dataclass
class BcStats:
    iterations: int = 0
    master_nodes: int = 0
    feasibility_cuts: int = 0
    optimality_cuts: int = 0
    solved: bool = False
    wall_time: float = 0.0
    upper_bound: float = float("inf")

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "nodes": self.master_nodes,
            "feasibility_cuts": self.feasibility_cuts,
            "optimality_cuts": self.optimality_cuts,
            "solved": int(self.solved),
            "upper_bound": self.upper_bound,
            "wall_time": self.wall_time,
        }


class _Master:
    """Assignment master: x_{i,d,k}, y_{d,k}, z_i, o_{d,k}, alpha_d."""

    def __init__(self, instance: Instance):
        self.instance = instance
        m = LinearModel()
        self.x: dict[tuple[int, int, int], int] = {}
        self.y: dict[tuple[int, int], int] = {}
        self.z: dict[int, int] = {}
        self.o: dict[tuple[int, int], int] = {}
        self.alpha: dict[int, int] = {}
        costs = instance.costs
        t1 = instance.regular_slots
        t2 = instance.overtime_slots

        for s in instance.surgeries:
            for d in range(1, instance.latest_day(s.id) + 1):
                for k in range(1, instance.rooms_per_day[d - 1] + 1):
                    self.x[(s.id, d, k)] = m.add_variable(
                        f"x_{s.id}_{d}_{k}", 0, 1, is_integer=True
                    )
        for d in range(1, instance.num_days + 1):
            for k in range(1, instance.rooms_per_day[d - 1] + 1):
                self.y[(d, k)] = m.add_variable(
                    f"y_{d}_{k}", 0, 1, is_integer=True, obj=float(costs.or_open_cost)
                )
                self.o[(d, k)] = m.add_variable(f"o_{d}_{k}", 0, max(t2, 0))
            alpha_ub = float(
                costs.overtime_slot_cost * t2 * instance.rooms_per_day[d - 1]
            )
            self.alpha[d] = m.add_variable(f"alpha_{d}", 0, alpha_ub, obj=1.0)
        for i in instance.elective_ids:
            self.z[i] = m.add_variable(
                f"z_{i}", 0, 1, is_integer=True, obj=float(costs.postponement_cost)
            )

        for s in instance.surgeries:
            cover = [
                (self.x[(s.id, d, k)], 1.0)
                for d in range(1, instance.latest_day(s.id) + 1)
                for k in range(1, instance.rooms_per_day[d - 1] + 1)
            ]
            if s.due_day <= instance.num_days:
                m.add_constraint(cover, EQUAL, 1.0, name=f"cover_{s.id}")
            else:
                m.add_constraint(
                    cover + [(self.z[s.id], 1.0)], EQUAL, 1.0, name=f"cover_{s.id}"
                )
        for d in range(1, instance.num_days + 1):
            for k in range(1, instance.rooms_per_day[d - 1] + 1):
                row = [
                    (self.x[(s.id, d, k)], float(s.duration))
                    for s in instance.surgeries
                    if (s.id, d, k) in self.x
                ]
                row.append((self.y[(d, k)], -float(t1)))
                row.append((self.o[(d, k)], -1.0))
                m.add_constraint(row, LESS, 0.0, name=f"load_{d}_{k}")
                m.add_constraint(
                    [(self.o[(d, k)], 1.0), (self.y[(d, k)], -float(t2))],
                    LESS,
                    0.0,
                    name=f"ovt_cap_{d}_{k}",
                )
            ovt_row = [
                (self.o[(d, k)], float(costs.overtime_slot_cost))
                for k in range(1, instance.rooms_per_day[d - 1] + 1)
            ]
            ovt_row.append((self.alpha[d], -1.0))
            m.add_constraint(ovt_row, LESS, 0.0, name=f"alpha_{d}")
            # interchangeable rooms: fix the labeling
            for k in range(1, instance.rooms_per_day[d - 1]):
                m.add_constraint(
                    [(self.y[(d, k)], -1.0), (self.y[(d, k + 1)], 1.0)],
                    LESS,
                    0.0,
                    name=f"sym_{d}_{k}",
                )
        for l in range(1, instance.num_surgeons + 1):
            mine = [s for s in instance.surgeries if s.surgeon == l]
            for d in range(1, instance.num_days + 1):
                row = [
                    (self.x[(s.id, d, k)], float(s.duration))
                    for s in mine
                    for k in range(1, instance.rooms_per_day[d - 1] + 1)
                    if (s.id, d, k) in self.x
                ]
                if row:
                    m.add_constraint(
                        row, LESS, float(instance.availability(l, d)), name=f"avail_{l}_{d}"
                    )
        self.model = m
        self.priority = {var: 1 for var in self.y.values()}

    def day_assignment(self, x: np.ndarray, d: int) -> list[tuple[int, int]]:
        """(surgery, room) pairs the master put on day d."""
        return sorted(
            (sid, k)
            for (sid, dd, k), var in self.x.items()
            if dd == d and x[var] > 0.5
        )


def feasibility_cut(
    master: _Master, day: int, assignment: list[tuple[int, int]]
) -> Optional[int]:
    """No-good cut: at least one (surgery, room) pick must change."""
    if not assignment:
        return None
    row = [(master.x[(sid, day, k)], 1.0) for sid, k in assignment]
    return master.model.add_constraint(
        row, LESS, float(len(assignment) - 1), name=f"nogood_{day}_{len(master.model.constraints)}"
    )


def optimality_cut(
    master: _Master, day: int, beta: float, assignment: list[tuple[int, int]]
) -> int:
    """If-then cut: repeating this exact day forces alpha_d >= beta;
    any change deactivates it."""
    assigned = set(assignment)
    row = [(master.alpha[day], 1.0)]
    for (sid, dd, k), var in master.x.items():
        if dd != day:
            continue
        if (sid, k) in assigned:
            row.append((var, -beta))
        else:
            row.append((var, beta))
    rhs = beta * (1 - len(assignment))
    return master.model.add_constraint(
        row, GREATER, rhs, name=f"opt_{day}_{len(master.model.constraints)}"
    )


@dataclass
class _SubResult:
    status: str  # optimal | infeasible
    beta: float
    starts: dict[int, int] = field(default_factory=dict)
    postponed: set[int] = field(default_factory=set)


def solve_day_subproblem(
    instance: Instance,
    day: int,
    assignment: list[tuple[int, int]],
    params: BcParams,
) -> _SubResult:
    """Sequence the day's surgeries inside their assigned rooms."""
    if not assignment:
        return _SubResult("optimal", 0.0)
    m = LinearModel()
    total = instance.total_slots
    t1 = instance.regular_slots
    costs = instance.costs
    big_m = float(total + max(instance.surgery(sid).duration for sid, _ in assignment))

    c_var: dict[int, int] = {}
    p_var: dict[int, int] = {}  # postponement inside the subproblem
    for sid, _ in assignment:
        s = instance.surgery(sid)
        c_var[sid] = m.add_variable(f"c_{sid}", 0, total)
        allow_post = (
            params.allow_subproblem_postponement and s.due_day > instance.num_days
        )
        p_var[sid] = m.add_variable(
            f"p_{sid}", 0, 1 if allow_post else 0, is_integer=True,
            obj=float(costs.postponement_cost) if allow_post else 0.0,
        )
        # completion of a scheduled surgery is at least its duration
        m.add_constraint(
            [(c_var[sid], 1.0), (p_var[sid], float(s.duration))],
            GREATER,
            float(s.duration),
            name=f"mincomp_{sid}",
        )

    def disjunction(i: int, j: int):
        # yij = 1: i runs after j; yij = 0: j runs after i.
        # postponed surgeries (p=1) deactivate both sides
        yij = m.add_variable(f"seq_{i}_{j}", 0, 1, is_integer=True)
        ti = float(instance.surgery(i).duration)
        tj = float(instance.surgery(j).duration)
        m.add_constraint(
            [
                (c_var[i], 1.0),
                (c_var[j], -1.0),
                (yij, -big_m),
                (p_var[i], big_m),
                (p_var[j], big_m),
            ],
            GREATER,
            ti - big_m,
            name=f"seq_a_{i}_{j}",
        )
        m.add_constraint(
            [
                (c_var[j], 1.0),
                (c_var[i], -1.0),
                (yij, big_m),
                (p_var[i], big_m),
                (p_var[j], big_m),
            ],
            GREATER,
            tj,
            name=f"seq_b_{i}_{j}",
        )

    by_room: dict[int, list[int]] = {}
    for sid, k in assignment:
        by_room.setdefault(k, []).append(sid)
    for k, members in sorted(by_room.items()):
        members.sort()
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                disjunction(members[b], members[a])
    by_surgeon: dict[int, list[int]] = {}
    for sid, _ in assignment:
        by_surgeon.setdefault(instance.surgery(sid).surgeon, []).append(sid)
    same_room_pairs = {
        (max(a, b), min(a, b))
        for members in by_room.values()
        for a in members
        for b in members
        if a != b
    }
    for l, members in sorted(by_surgeon.items()):
        members.sort()
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                pair = (members[b], members[a])
                if pair not in same_room_pairs:
                    disjunction(*pair)

    if params.overtime_mode == "per_surgery":
        for sid, _ in assignment:
            s = instance.surgery(sid)
            ovt = m.add_variable(
                f"ovt_{sid}", 0, total, obj=float(costs.overtime_slot_cost)
            )
            w = m.add_variable(f"w_{sid}", 0, 1, is_integer=True)
            # ovt >= c - |T1| unless the whole surgery is in overtime
            m.add_constraint(
                [(ovt, 1.0), (c_var[sid], -1.0), (w, big_m), (p_var[sid], big_m)],
                GREATER,
                -float(t1),
                name=f"ovt_tail_{sid}",
            )
            m.add_constraint(
                [(ovt, 1.0), (w, -big_m), (p_var[sid], big_m)],
                GREATER,
                float(s.duration) - big_m,
                name=f"ovt_full_{sid}",
            )
    else:
        for k in sorted(by_room):
            o = m.add_variable(
                f"o_{k}", 0, instance.overtime_slots,
                obj=float(costs.overtime_slot_cost),
            )
            for sid in by_room[k]:
                m.add_constraint(
                    [(o, 1.0), (c_var[sid], -1.0), (p_var[sid], big_m)],
                    GREATER,
                    -float(t1),
                    name=f"roomovt_{k}_{sid}",
                )

    result = solve_mip(
        m, params.subproblem_limits or MipLimits(), explore_up_first=True
    )
    if result.status == "infeasible":
        return _SubResult("infeasible", float("inf"))
    if not result.has_solution:
        return _SubResult("infeasible", float("inf"))
    starts = {}
    postponed = set()
    for sid, _ in assignment:
        if result.x[p_var[sid]] > 0.5:
            postponed.add(sid)
        else:
            s = instance.surgery(sid)
            starts[sid] = float(result.x[c_var[sid]]) - s.duration
    return _SubResult("optimal", result.upper_bound, starts, postponed)


def _left_shift_starts(
    instance: Instance,
    day: int,
    assignment: list[tuple[int, int]],
    raw_starts: dict[int, float],
) -> dict[int, int]:
    """Rebuild integral start times preserving the subproblem's order."""
    room_free: dict[int, int] = {}
    surgeon_free: dict[int, int] = {}
    starts: dict[int, int] = {}
    order = sorted(
        (raw_starts[sid], sid, k) for sid, k in assignment if sid in raw_starts
    )
    for _, sid, k in order:
        s = instance.surgery(sid)
        t = max(room_free.get(k, 0), surgeon_free.get(s.surgeon, 0))
        starts[sid] = t
        room_free[k] = t + s.duration
        surgeon_free[s.surgeon] = t + s.duration
    return starts


def solve_bc(
    instance: Instance, params: Optional[BcParams] = None
) -> tuple[Optional[Schedule], BcStats]:
    """Iterate master and day subproblems until every day accepts."""
    params = params or BcParams()
    stats = BcStats()
    t0 = time.monotonic()
    master = _Master(instance)

    for it in range(1, params.max_iterations + 1):
        if params.time_limit is not None and time.monotonic() - t0 > params.time_limit:
            break
        stats.iterations = it
        limits = params.master_limits or MipLimits(
            time_limit=None
            if params.time_limit is None
            else max(1.0, params.time_limit - (time.monotonic() - t0))
        )
        result = solve_mip(
            master.model, limits, branch_priority=master.priority,
            explore_up_first=True,
        )
        stats.master_nodes += result.nodes
        if result.status == "infeasible":
            stats.wall_time = time.monotonic() - t0
            return None, stats
        if not result.has_solution:
            break

        x = result.x
        all_accept = True
        day_outputs: dict[int, _SubResult] = {}
        for d in range(1, instance.num_days + 1):
            assignment = master.day_assignment(x, d)
            if not assignment:
                day_outputs[d] = _SubResult("optimal", 0.0)
                continue
            sub = solve_day_subproblem(instance, d, assignment, params)
            day_outputs[d] = sub
            alpha_bar = float(x[master.alpha[d]])
            if sub.status == "infeasible":
                feasibility_cut(master, d, assignment)
                stats.feasibility_cuts += 1
                all_accept = False
            elif sub.beta > alpha_bar + ALPHA_TOL:
                optimality_cut(master, d, sub.beta, assignment)
                stats.optimality_cuts += 1
                all_accept = False

        if all_accept:
            assignments: dict[int, Assignment] = {}
            rooms_open = {d: 0 for d in range(1, instance.num_days + 1)}
            postponed = set()
            for i in instance.elective_ids:
                if x[master.z[i]] > 0.5:
                    postponed.add(i)
            for d in range(1, instance.num_days + 1):
                assignment = master.day_assignment(x, d)
                sub = day_outputs[d]
                postponed |= sub.postponed
                starts = _left_shift_starts(
                    instance, d, assignment, sub.starts
                )
                open_rooms = sorted(
                    {k for sid, k in assignment if sid in starts}
                )
                relabel = {k: r + 1 for r, k in enumerate(open_rooms)}
                for sid, k in assignment:
                    if sid in starts:
                        assignments[sid] = Assignment(d, starts[sid], relabel[k])
                rooms_open[d] = len(open_rooms)
            schedule = Schedule(assignments, frozenset(postponed), rooms_open)
            schedule = schedule.with_costs(evaluate(schedule, instance))
            stats.solved = True
            stats.upper_bound = float(schedule.cost_breakdown.total)
            stats.wall_time = time.monotonic() - t0
            return schedule, stats

    stats.wall_time = time.monotonic() - t0
    return None, stats
