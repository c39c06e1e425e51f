"""Time-indexed compact MIPs: the room-free reformulation (PMIORPS)
and the per-room baseline (MIORPS), plus solve-and-decode wrappers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from fractions import Fraction
from math import gcd

from .core import (
    Assignment,
    Instance,
    Schedule,
    evaluate,
    overtime_cost,
    recover_rooms,
)
from .errors import NoSolutionError
from .optimizer import EQUAL, GREATER, LESS, LinearModel, MipLimits, MipResult, solve_mip


def cost_granularity(instance: Instance) -> Optional[float]:
    """Largest g such that every schedule cost is a multiple of g."""
    values = [
        instance.costs.or_open_cost,
        instance.costs.postponement_cost,
        instance.costs.overtime_slot_cost,
    ]
    values = [v for v in values if v > 0]
    if not values:
        return None
    denom = 1
    for v in values:
        denom = denom * v.denominator // gcd(denom, v.denominator)
    nums = [int(v * denom) for v in values]
    g = nums[0]
    for n in nums[1:]:
        g = gcd(g, n)
    return float(Fraction(g, denom))

Key = tuple


@dataclass
class VariableIndex:
    """Bidirectional map between model columns and semantic keys.

    Keys: ('x', i, d, t) or ('x', i, d, k, t); ('y', d) or ('y', d, k);
    ('z', i).
    """

    by_key: dict[Key, int] = field(default_factory=dict)
    by_pos: dict[int, Key] = field(default_factory=dict)

    def put(self, key: Key, pos: int) -> None:
        assert key not in self.by_key
        self.by_key[key] = pos
        self.by_pos[pos] = key

    def pos(self, key: Key) -> int:
        return self.by_key[key]

    def key(self, pos: int) -> Key:
        return self.by_pos[pos]

    def family(self, tag: str):
        return [(k, p) for k, p in self.by_key.items() if k[0] == tag]


def _ongoing_starts(t: int, duration: int, start_slots: range) -> list[int]:
    """Start slots that leave the surgery running during slot t."""
    lo = max(t - duration + 1, 0)
    return [tp for tp in range(lo, t + 1) if tp in start_slots]


def build_pmiorps(instance: Instance) -> tuple[LinearModel, VariableIndex]:
    """Room-free model: x_{i,d,t} starts, integer y_d room counts."""
    model = LinearModel()
    index = VariableIndex()
    costs = instance.costs
    total = instance.total_slots

    for s in instance.surgeries:
        for d in range(1, instance.latest_day(s.id) + 1):
            for t in instance.start_slots(s.id):
                c = float(
                    overtime_cost(t, s.duration, instance.regular_slots, costs.overtime_slot_cost)
                )
                pos = model.add_variable(
                    f"x_{s.id}_{d}_{t}", 0, 1, is_integer=True, obj=c
                )
                index.put(("x", s.id, d, t), pos)
    for d in range(1, instance.num_days + 1):
        cap = instance.rooms_per_day[d - 1]
        pos = model.add_variable(
            f"y_{d}", 0, cap, is_integer=True, obj=float(costs.or_open_cost)
        )
        index.put(("y", d), pos)
    for i in instance.elective_ids:
        pos = model.add_variable(
            f"z_{i}", 0, 1, is_integer=True, obj=float(costs.postponement_cost)
        )
        index.put(("z", i), pos)

    for s in instance.surgeries:
        cover = [
            (index.pos(("x", s.id, d, t)), 1.0)
            for d in range(1, instance.latest_day(s.id) + 1)
            for t in instance.start_slots(s.id)
        ]
        if s.due_day <= instance.num_days:
            model.add_constraint(cover, EQUAL, 1.0, name=f"cover_{s.id}")
        else:
            model.add_constraint(
                cover + [(index.pos(("z", s.id)), 1.0)], EQUAL, 1.0, name=f"cover_{s.id}"
            )

    for d in range(1, instance.num_days + 1):
        for t in range(total):
            row = []
            for s in instance.surgeries:
                if d > s.due_day:
                    continue
                for tp in _ongoing_starts(t, s.duration, instance.start_slots(s.id)):
                    row.append((index.pos(("x", s.id, d, tp)), 1.0))
            row.append((index.pos(("y", d)), -1.0))
            model.add_constraint(row, LESS, 0.0, name=f"conc_{d}_{t}")

    for l in range(1, instance.num_surgeons + 1):
        mine = [s for s in instance.surgeries if s.surgeon == l]
        for d in range(1, instance.num_days + 1):
            eligible = [s for s in mine if d <= s.due_day]
            for t in range(total):
                row = []
                candidates = 0
                for s in eligible:
                    starts = _ongoing_starts(t, s.duration, instance.start_slots(s.id))
                    if starts:
                        candidates += 1
                    for tp in starts:
                        row.append((index.pos(("x", s.id, d, tp)), 1.0))
                if candidates >= 2:
                    model.add_constraint(row, LESS, 1.0, name=f"surg_{l}_{d}_{t}")
            avail_row = [
                (index.pos(("x", s.id, d, t)), float(s.duration))
                for s in eligible
                for t in instance.start_slots(s.id)
            ]
            if avail_row:
                model.add_constraint(
                    avail_row, LESS, float(instance.availability(l, d)), name=f"avail_{l}_{d}"
                )

    for d in range(1, instance.num_days + 1):
        model.add_constraint(
            [(index.pos(("y", d)), 1.0)],
            LESS,
            float(instance.rooms_per_day[d - 1]),
            name=f"cap_{d}",
        )
    return model, index


def build_miorps(
    instance: Instance, symmetry_breaking: bool = True
) -> tuple[LinearModel, VariableIndex]:
    """Per-room baseline: x_{i,d,k,t}, binary y_{d,k}, explicit linking rows.

    Rooms are interchangeable, so by default ordering rows
    y_{d,k} >= y_{d,k+1} cut the room-relabeling symmetry; they leave
    the optimal value untouched.
    """
    model = LinearModel()
    index = VariableIndex()
    costs = instance.costs
    total = instance.total_slots

    for s in instance.surgeries:
        for d in range(1, instance.latest_day(s.id) + 1):
            for k in range(1, instance.rooms_per_day[d - 1] + 1):
                for t in instance.start_slots(s.id):
                    c = float(
                        overtime_cost(
                            t, s.duration, instance.regular_slots, costs.overtime_slot_cost
                        )
                    )
                    pos = model.add_variable(
                        f"x_{s.id}_{d}_{k}_{t}", 0, 1, is_integer=True, obj=c
                    )
                    index.put(("x", s.id, d, k, t), pos)
    for d in range(1, instance.num_days + 1):
        for k in range(1, instance.rooms_per_day[d - 1] + 1):
            pos = model.add_variable(
                f"y_{d}_{k}", 0, 1, is_integer=True, obj=float(costs.or_open_cost)
            )
            index.put(("y", d, k), pos)
    for i in instance.elective_ids:
        pos = model.add_variable(
            f"z_{i}", 0, 1, is_integer=True, obj=float(costs.postponement_cost)
        )
        index.put(("z", i), pos)

    def xs_for(s):
        for d in range(1, instance.latest_day(s.id) + 1):
            for k in range(1, instance.rooms_per_day[d - 1] + 1):
                for t in instance.start_slots(s.id):
                    yield d, k, t

    for s in instance.surgeries:
        cover = [(index.pos(("x", s.id, d, k, t)), 1.0) for d, k, t in xs_for(s)]
        if s.due_day <= instance.num_days:
            model.add_constraint(cover, EQUAL, 1.0, name=f"cover_{s.id}")
        else:
            model.add_constraint(
                cover + [(index.pos(("z", s.id)), 1.0)], EQUAL, 1.0, name=f"cover_{s.id}"
            )

    for d in range(1, instance.num_days + 1):
        for k in range(1, instance.rooms_per_day[d - 1] + 1):
            for t in range(total):
                row = []
                for s in instance.surgeries:
                    if d > s.due_day:
                        continue
                    for tp in _ongoing_starts(t, s.duration, instance.start_slots(s.id)):
                        row.append((index.pos(("x", s.id, d, k, tp)), 1.0))
                model.add_constraint(row, LESS, 1.0, name=f"room_{d}_{k}_{t}")

    for l in range(1, instance.num_surgeons + 1):
        mine = [s for s in instance.surgeries if s.surgeon == l]
        for d in range(1, instance.num_days + 1):
            eligible = [s for s in mine if d <= s.due_day]
            for t in range(total):
                row = []
                candidates = 0
                for s in eligible:
                    starts = _ongoing_starts(t, s.duration, instance.start_slots(s.id))
                    if starts:
                        candidates += 1
                    for tp in starts:
                        for k in range(1, instance.rooms_per_day[d - 1] + 1):
                            row.append((index.pos(("x", s.id, d, k, tp)), 1.0))
                if candidates >= 2:
                    model.add_constraint(row, LESS, 1.0, name=f"surg_{l}_{d}_{t}")
            avail_row = [
                (index.pos(("x", s.id, d, k, t)), float(s.duration))
                for s in eligible
                for k in range(1, instance.rooms_per_day[d - 1] + 1)
                for t in instance.start_slots(s.id)
            ]
            if avail_row:
                model.add_constraint(
                    avail_row, LESS, float(instance.availability(l, d)), name=f"avail_{l}_{d}"
                )

    for s in instance.surgeries:
        for d, k, t in xs_for(s):
            model.add_constraint(
                [
                    (index.pos(("x", s.id, d, k, t)), 1.0),
                    (index.pos(("y", d, k)), -1.0),
                ],
                LESS,
                0.0,
                name=f"link_{s.id}_{d}_{k}_{t}",
            )

    if symmetry_breaking:
        for d in range(1, instance.num_days + 1):
            for k in range(1, instance.rooms_per_day[d - 1]):
                model.add_constraint(
                    [
                        (index.pos(("y", d, k)), -1.0),
                        (index.pos(("y", d, k + 1)), 1.0),
                    ],
                    LESS,
                    0.0,
                    name=f"sym_{d}_{k}",
                )
    return model, index


def decode_solution(
    x: np.ndarray, index: VariableIndex, instance: Instance, model_kind: str
) -> Schedule:
    assignments: dict[int, Assignment] = {}
    postponed: set[int] = set()
    rooms_open = {d: 0 for d in range(1, instance.num_days + 1)}

    if model_kind == "pmiorps":
        for key, pos in index.family("x"):
            if x[pos] > 0.5:
                _, i, d, t = key
                assignments[i] = Assignment(d, t)
        for key, pos in index.family("y"):
            rooms_open[key[1]] = int(round(x[pos]))
    else:
        open_rooms: dict[int, list[int]] = {d: [] for d in rooms_open}
        for key, pos in index.family("y"):
            _, d, k = key
            if x[pos] > 0.5:
                open_rooms[d].append(k)
        relabel = {
            (d, k): r + 1
            for d, ks in open_rooms.items()
            for r, k in enumerate(sorted(ks))
        }
        for key, pos in index.family("x"):
            if x[pos] > 0.5:
                _, i, d, k, t = key
                assignments[i] = Assignment(d, t, relabel[(d, k)])
        for d, ks in open_rooms.items():
            rooms_open[d] = len(ks)

    for key, pos in index.family("z"):
        if x[pos] > 0.5:
            postponed.add(key[1])

    schedule = Schedule(assignments, frozenset(postponed), rooms_open)
    if model_kind == "pmiorps":
        schedule = recover_rooms(schedule, instance)
    return schedule.with_costs(evaluate(schedule, instance))


def schedule_to_vector(
    schedule: Schedule, model: LinearModel, index: VariableIndex, model_kind: str
) -> np.ndarray:
    """Encode a schedule as a model-space point (incumbent seeding)."""
    x = np.zeros(model.num_variables)
    for sid, a in schedule.assignments.items():
        if model_kind == "pmiorps":
            x[index.pos(("x", sid, a.day, a.start))] = 1.0
        else:
            x[index.pos(("x", sid, a.day, a.room, a.start))] = 1.0
    for d, y in schedule.rooms_open.items():
        if model_kind == "pmiorps":
            x[index.pos(("y", d))] = float(y)
        else:
            for k in range(1, y + 1):
                x[index.pos(("y", d, k))] = 1.0
    for sid in schedule.postponed:
        x[index.pos(("z", sid))] = 1.0
    return x


def _rounding_heuristic(instance: Instance, model, index: VariableIndex, model_kind: str):
    """First-fit decode under the node's room-count profile.

    Plateau nodes (integral y, fractional starts) get an incumbent at
    exactly the plateau value, which lets the bound prune them.
    """
    from .heuristics import first_fit_decode, sorted_initial_lists

    rng = np.random.default_rng(0)
    mand, elec = sorted_initial_lists(instance, rng)
    y_keys = index.family("y")
    seen: dict[tuple, Optional[tuple[np.ndarray, float]]] = {}

    def heuristic(x: np.ndarray):
        caps: dict[int, float] = {}
        for key, pos in y_keys:
            d = key[1]
            caps[d] = caps.get(d, 0.0) + x[pos]
        rounded = {d: int(round(v)) for d, v in caps.items()}
        if any(abs(caps[d] - rounded[d]) > 1e-6 for d in caps):
            return None
        cache_key = tuple(sorted(rounded.items()))
        if cache_key in seen:
            return seen[cache_key]
        dec = first_fit_decode(mand, elec, instance, room_caps=rounded)
        out = None
        if dec.ok:
            sched = dec.schedule
            if model_kind == "miorps":
                sched = recover_rooms(sched, instance)
            vec = schedule_to_vector(sched, model, index, model_kind)
            out = (vec, float(sched.cost_breakdown.total))
        seen[cache_key] = out
        return out

    return heuristic


def solve_compact(
    instance: Instance,
    model_kind: str = "pmiorps",
    limits: Optional[MipLimits] = None,
    warm_schedule: Optional[Schedule] = None,
) -> tuple[Optional[Schedule], MipResult]:
    """Build, solve and decode one of the compact models.

    Room-count variables get branching priority over start-time
    variables (they decide the dominant cost), a first-fit rounding
    heuristic runs at every node, and a heuristic warm schedule may
    seed the incumbent.  Returns (None, result) when the limit tripped
    before any incumbent was found.
    """
    if model_kind not in ("pmiorps", "miorps"):
        raise ValueError(f"unknown model kind {model_kind!r}")
    builder = build_pmiorps if model_kind == "pmiorps" else build_miorps
    model, index = builder(instance)
    priority = {pos: 1 for key, pos in index.family("y")}
    incumbent = None
    if warm_schedule is not None:
        ws = warm_schedule
        if model_kind == "miorps" and any(
            a.room is None for a in ws.assignments.values()
        ):
            ws = recover_rooms(ws, instance)
        vec = schedule_to_vector(ws, model, index, model_kind)
        incumbent = (vec, float(evaluate(ws, instance).total))
    result = solve_mip(
        model,
        limits,
        initial_incumbent=incumbent,
        branch_priority=priority,
        objective_granularity=cost_granularity(instance),
        explore_up_first=True,
        node_heuristic=_rounding_heuristic(instance, model, index, model_kind),
    )
    if not result.has_solution:
        return None, result
    schedule = decode_solution(result.x, index, instance, model_kind)
    return schedule, result
