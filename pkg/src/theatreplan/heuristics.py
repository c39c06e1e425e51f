"""First-fit schedule decoding and the priority-rule baselines.

The decoder walks an ordered surgery list and drops each surgery into
the earliest feasible day and slot, preferring existing open rooms
over opening another one (a new room is opened only when no slot in
the day works otherwise).  Electives that fit nowhere are postponed;
a mandatory surgery that fits nowhere fails the decode.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .core import Assignment, CostBreakdown, Instance, Schedule, overtime_cost
from .errors import NoSolutionError, ValidationError

PRIORITY_RULES = ("lpt", "spt", "edd", "lpt_edd")


@dataclass(frozen=True)
class DecodeResult:
    schedule: Optional[Schedule]
    failed_surgery: Optional[int] = None

    @property
    def ok(self) -> bool:
        return self.schedule is not None


class _DayState:
    __slots__ = ("ongoing", "y", "busy", "used", "cap", "total")

    def __init__(self, total: int, cap: int):
        self.ongoing = [0] * total
        self.y = 0
        self.busy = {}  # surgeon -> per-slot flags
        self.used = {}  # surgeon -> slots consumed
        self.cap = cap
        self.total = total

    def scan(self, dur: int, conc_limit: int, surgeon: int) -> Optional[int]:
        """Earliest start whose whole window fits; skip-ahead on conflicts."""
        ongoing = self.ongoing
        busy = self.busy.get(surgeon)
        t = 0
        end = self.total - dur
        while t <= end:
            j = t
            stop = t + dur
            hit = -1
            while j < stop:
                if ongoing[j] > conc_limit or (busy is not None and busy[j]):
                    hit = j
                    break
                j += 1
            if hit < 0:
                return t
            t = hit + 1
        return None

    def place(self, start: int, dur: int, surgeon: int, opens_room: bool) -> None:
        for j in range(start, start + dur):
            self.ongoing[j] += 1
        if opens_room:
            self.y += 1
        busy = self.busy.setdefault(surgeon, [False] * self.total)
        for j in range(start, start + dur):
            busy[j] = True
        self.used[surgeon] = self.used.get(surgeon, 0) + dur


def first_fit_decode(
    mandatory_order: Sequence[int],
    elective_order: Sequence[int],
    instance: Instance,
    room_caps: Optional[dict[int, int]] = None,
) -> DecodeResult:
    """Decode (mandatory order, elective order) into a schedule.

    room_caps optionally tightens the per-day ceiling on open rooms
    below the instance's physical capacity (the enhancement local
    search drives this).
    """
    if sorted(mandatory_order) != sorted(instance.mandatory_ids) or sorted(
        elective_order
    ) != sorted(instance.elective_ids):
        raise ValidationError("orders must partition the mandatory/elective id sets")
    return _decode(list(mandatory_order) + list(elective_order), instance, room_caps)


def decode_order(
    order: Sequence[int],
    instance: Instance,
    room_caps: Optional[dict[int, int]] = None,
) -> DecodeResult:
    """Decode a single merged ordering (phase-2 chromosomes)."""
    if sorted(order) != list(range(1, len(instance.surgeries) + 1)):
        raise ValidationError("order must be a permutation of all surgery ids")
    return _decode(list(order), instance, room_caps)


def _decode(
    order: list[int], instance: Instance, room_caps: Optional[dict[int, int]]
) -> DecodeResult:
    total = instance.total_slots
    days: list[_DayState] = []
    for d in range(1, instance.num_days + 1):
        cap = instance.rooms_per_day[d - 1]
        if room_caps is not None and d in room_caps:
            cap = min(cap, max(room_caps[d], 0))
        days.append(_DayState(total, cap))

    assignments: dict[int, Assignment] = {}
    postponed: set[int] = set()
    overtime = Fraction(0)
    costs = instance.costs

    for sid in order:
        s = instance.surgery(sid)
        placed = False
        for d in range(1, instance.latest_day(sid) + 1):
            state = days[d - 1]
            if state.used.get(s.surgeon, 0) + s.duration > instance.availability(
                s.surgeon, d
            ):
                continue
            # pass 1: an existing open room can host the surgery
            start = state.scan(s.duration, state.y - 1, s.surgeon)
            opens = False
            if start is None and state.y < state.cap:
                # pass 2: open one more room
                start = state.scan(s.duration, state.y, s.surgeon)
                opens = start is not None
            if start is None:
                continue
            state.place(start, s.duration, s.surgeon, opens)
            assignments[sid] = Assignment(d, start)
            overtime += overtime_cost(
                start, s.duration, instance.regular_slots, costs.overtime_slot_cost
            )
            placed = True
            break
        if not placed:
            if s.due_day <= instance.num_days:
                return DecodeResult(None, failed_surgery=sid)
            postponed.add(sid)

    rooms_open = {d + 1: days[d].y for d in range(instance.num_days)}
    postponement = costs.postponement_cost * len(postponed)
    or_opening = costs.or_open_cost * sum(st.y for st in days)
    breakdown = CostBreakdown(
        postponement, or_opening, overtime, postponement + or_opening + overtime
    )
    return DecodeResult(
        Schedule(assignments, frozenset(postponed), rooms_open, breakdown)
    )


def sorted_initial_lists(
    instance: Instance, rng: np.random.Generator
) -> tuple[list[int], list[int]]:
    """Due-date-ascending lists; shorter surgery breaks ties, then a
    seeded random draw."""

    def order(ids):
        keyed = [
            (instance.surgery(i).due_day, instance.surgery(i).duration, rng.random(), i)
            for i in ids
        ]
        keyed.sort()
        return [i for *_, i in keyed]

    return order(instance.mandatory_ids), order(instance.elective_ids)


def rule_orders(rule: str, instance: Instance) -> tuple[list[int], list[int]]:
    rule = rule.lower().replace("-", "_").replace("/", "_")
    if rule not in PRIORITY_RULES:
        raise ValidationError(f"unknown priority rule {rule!r}")

    def key(i):
        s = instance.surgery(i)
        if rule == "lpt":
            return (-s.duration, i)
        if rule == "spt":
            return (s.duration, i)
        if rule == "edd":
            return (s.due_day, i)
        return (s.due_day, -s.duration, i)  # lpt_edd: earliest due, longest first

    return (
        sorted(instance.mandatory_ids, key=key),
        sorted(instance.elective_ids, key=key),
    )


def priority_rule_schedule(rule: str, instance: Instance) -> Schedule:
    """One of the LPT+/SPT+/EDD+/LPT-EDD+ baselines: sort, then first-fit."""
    mandatory, elective = rule_orders(rule, instance)
    result = first_fit_decode(mandatory, elective, instance)
    if not result.ok:
        raise NoSolutionError(
            f"rule {rule}: mandatory surgery {result.failed_surgery} cannot be placed"
        )
    return result.schedule
