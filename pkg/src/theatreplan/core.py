"""Domain types, the overtime cost function, schedule evaluation,
feasibility checking and room recovery.

Slots are 0-based internally; slot indices >= regular_slots are
overtime.  Days and surgery ids are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional

from .errors import InputError, RoomRecoveryError, ValidationError
from .money import Money, as_money


@dataclass(frozen=True)
class CostParams:
    """Cost coefficients: OR-day opening, per-overtime-slot, postponement."""

    or_open_cost: Money = Fraction(1000)
    overtime_slot_cost: Money = Fraction(1000, 24)
    postponement_cost: Money = Fraction(500)

    def __post_init__(self):
        object.__setattr__(self, "or_open_cost", as_money(self.or_open_cost))
        object.__setattr__(
            self, "overtime_slot_cost", as_money(self.overtime_slot_cost)
        )
        object.__setattr__(
            self, "postponement_cost", as_money(self.postponement_cost)
        )
        for name in ("or_open_cost", "overtime_slot_cost", "postponement_cost"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class Surgery:
    """One surgery: duration in slots, 1-based due day, owning surgeon."""

    id: int
    duration: int
    due_day: int
    surgeon: int

    def __post_init__(self):
        if self.duration < 1:
            raise ValidationError(f"surgery {self.id}: duration must be >= 1")
        if self.due_day < 1:
            raise ValidationError(f"surgery {self.id}: due_day must be >= 1")
        if self.surgeon < 1:
            raise ValidationError(f"surgery {self.id}: surgeon must be >= 1")


@dataclass(frozen=True)
class Instance:
    """A complete problem input.

    surgeon_availability[l-1][d-1] is the slot budget of surgeon l on
    day d.  A surgery is mandatory iff its due day falls inside the
    horizon (due_day <= num_days); this is derived, never stored.
    """

    surgeries: tuple[Surgery, ...]
    num_days: int
    regular_slots: int
    overtime_slots: int
    rooms_per_day: tuple[int, ...]
    surgeon_availability: tuple[tuple[int, ...], ...]
    costs: CostParams = field(default_factory=CostParams)
    slot_minutes: int = 5

    def __post_init__(self):
        object.__setattr__(self, "surgeries", tuple(self.surgeries))
        object.__setattr__(self, "rooms_per_day", tuple(self.rooms_per_day))
        object.__setattr__(
            self,
            "surgeon_availability",
            tuple(tuple(row) for row in self.surgeon_availability),
        )
        self._validate()

    def _validate(self):
        if self.num_days < 1:
            raise ValidationError("num_days must be >= 1")
        if self.regular_slots < 1 or self.overtime_slots < 0:
            raise ValidationError("slot grid must have regular >= 1, overtime >= 0")
        if self.slot_minutes < 1:
            raise ValidationError("slot_minutes must be >= 1")
        if len(self.rooms_per_day) != self.num_days:
            raise ValidationError("rooms_per_day must list one count per day")
        if any(k < 1 for k in self.rooms_per_day):
            raise ValidationError("every day needs at least one room")
        ids = [s.id for s in self.surgeries]
        if ids != list(range(1, len(ids) + 1)):
            raise ValidationError("surgery ids must be unique and contiguous from 1")
        total = self.total_slots
        for s in self.surgeries:
            if s.duration > total:
                raise ValidationError(
                    f"surgery {s.id}: duration {s.duration} exceeds day length {total}"
                )
        if not self.surgeon_availability:
            raise ValidationError("at least one surgeon row is required")
        for row in self.surgeon_availability:
            if len(row) != self.num_days:
                raise ValidationError("availability rows must cover every day")
            for a in row:
                if a < 0 or a > total:
                    raise ValidationError(
                        f"availability {a} outside [0, {total}]"
                    )
        num_surgeons = len(self.surgeon_availability)
        for s in self.surgeries:
            if s.surgeon > num_surgeons:
                raise ValidationError(
                    f"surgery {s.id} references unknown surgeon {s.surgeon}"
                )

    @property
    def total_slots(self) -> int:
        return self.regular_slots + self.overtime_slots

    @property
    def num_surgeons(self) -> int:
        return len(self.surgeon_availability)

    def surgery(self, sid: int) -> Surgery:
        if not 1 <= sid <= len(self.surgeries):
            raise InputError(f"unknown surgery id {sid}")
        return self.surgeries[sid - 1]

    def is_mandatory(self, sid: int) -> bool:
        return self.surgery(sid).due_day <= self.num_days

    @property
    def mandatory_ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self.surgeries if s.due_day <= self.num_days)

    @property
    def elective_ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self.surgeries if s.due_day > self.num_days)

    def availability(self, surgeon: int, day: int) -> int:
        return self.surgeon_availability[surgeon - 1][day - 1]

    def latest_day(self, sid: int) -> int:
        """Last day the surgery may start on (due date capped at horizon)."""
        return min(self.surgery(sid).due_day, self.num_days)

    def start_slots(self, sid: int) -> range:
        """All start slots that let the surgery finish within the day."""
        return range(0, self.total_slots - self.surgery(sid).duration + 1)


class Assignment(NamedTuple):
    day: int
    start: int
    room: Optional[int] = None


class CostBreakdown(NamedTuple):
    postponement: Money
    or_opening: Money
    overtime: Money
    total: Money


@dataclass(frozen=True)
class Schedule:
    """Any method's output: per-surgery placements plus postponements.

    rooms_open[d] is the y_d of the model; it must dominate the
    concurrency profile of day d.
    """

    assignments: dict[int, Assignment]
    postponed: frozenset[int]
    rooms_open: dict[int, int]
    cost_breakdown: Optional[CostBreakdown] = None

    def __post_init__(self):
        object.__setattr__(self, "assignments", dict(self.assignments))
        object.__setattr__(self, "postponed", frozenset(self.postponed))
        object.__setattr__(self, "rooms_open", dict(self.rooms_open))

    def with_costs(self, breakdown: CostBreakdown) -> "Schedule":
        return Schedule(self.assignments, self.postponed, self.rooms_open, breakdown)

    def without_rooms(self) -> "Schedule":
        return Schedule(
            {sid: Assignment(a.day, a.start) for sid, a in self.assignments.items()},
            self.postponed,
            self.rooms_open,
            self.cost_breakdown,
        )


class Violation(NamedTuple):
    tag: str
    day: Optional[int]
    slot: Optional[int]
    surgery: Optional[int]
    magnitude: float


@dataclass(frozen=True)
class FeasibilityReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def overtime_cost(
    start_slot: int, duration: int, regular_slots: int, overtime_slot_cost: Money
) -> Money:
    """Cost of the overtime slots a surgery occupies.

    Zero when it ends inside regular time, the full duration when it
    starts at or after the regular/overtime boundary, and the
    overhang otherwise.
    """
    if start_slot < 0:
        raise InputError("start_slot must be >= 0")
    if duration < 1:
        raise InputError("duration must be >= 1")
    end = start_slot + duration
    c = as_money(overtime_slot_cost)
    if end < regular_slots:
        return Fraction(0)
    if start_slot >= regular_slots:
        return c * duration
    return c * (end - regular_slots)


def evaluate(schedule: Schedule, instance: Instance) -> CostBreakdown:
    """Cost breakdown of a schedule: postponement + OR opening + overtime."""
    costs = instance.costs
    for sid in schedule.assignments:
        instance.surgery(sid)  # raises InputError on unknown ids
    for sid in schedule.postponed:
        instance.surgery(sid)
    postponement = costs.postponement_cost * len(schedule.postponed)
    or_opening = costs.or_open_cost * sum(schedule.rooms_open.values())
    overtime = Fraction(0)
    for sid, a in schedule.assignments.items():
        overtime += overtime_cost(
            a.start,
            instance.surgery(sid).duration,
            instance.regular_slots,
            costs.overtime_slot_cost,
        )
    return CostBreakdown(
        postponement, or_opening, overtime, postponement + or_opening + overtime
    )


def _coalesce_runs(excess_by_slot: dict[int, int]) -> list[tuple[int, int]]:
    """Group violating slots into maximal runs: (first slot, max excess)."""
    runs = []
    for slot in sorted(excess_by_slot):
        if runs and slot == runs[-1][2] + 1:
            first, worst, _ = runs[-1]
            runs[-1] = (first, max(worst, excess_by_slot[slot]), slot)
        else:
            runs.append((slot, excess_by_slot[slot], slot))
    return [(first, worst) for first, worst, _ in runs]


def check_feasibility(schedule: Schedule, instance: Instance) -> FeasibilityReport:
    """Report every breached schedule invariant.

    One entry per violation, ordered by (tag, day, slot, surgery id).
    Contiguous violating slots of the same constraint collapse into a
    single entry anchored at the first slot.
    """
    out: list[Violation] = []
    total = instance.total_slots
    known = set(range(1, len(instance.surgeries) + 1))

    for sid in sorted(set(schedule.assignments) - known):
        out.append(Violation("unknown-surgery", None, None, sid, 1))
    for sid in sorted(set(schedule.postponed) - known):
        out.append(Violation("unknown-surgery", None, None, sid, 1))

    assigned = set(schedule.assignments) & known
    postponed = set(schedule.postponed) & known
    for sid in sorted(assigned & postponed):
        out.append(Violation("assigned-and-postponed", None, None, sid, 1))
    for sid in sorted(known - assigned - postponed):
        out.append(Violation("unassigned", None, None, sid, 1))
    for sid in sorted(postponed):
        if instance.is_mandatory(sid):
            out.append(Violation("mandatory-postponed", None, None, sid, 1))

    for sid in sorted(assigned):
        a = schedule.assignments[sid]
        s = instance.surgery(sid)
        if not 1 <= a.day <= instance.num_days:
            out.append(Violation("day-range", a.day, None, sid, 1))
            continue
        if a.day > s.due_day:
            out.append(Violation("due-date", a.day, None, sid, a.day - s.due_day))
        if a.start < 0 or a.start + s.duration > total:
            out.append(
                Violation(
                    "overrun", a.day, a.start, sid, max(0, a.start + s.duration - total)
                )
            )

    for day in range(1, instance.num_days + 1):
        y = schedule.rooms_open.get(day, 0)
        cap = instance.rooms_per_day[day - 1]
        if y < 0 or y > cap:
            out.append(Violation("room-cap", day, None, None, abs(y - cap) if y > cap else -y))

        ongoing = [0] * total
        by_surgeon: dict[int, list[int]] = {}
        used: dict[int, int] = {}
        by_room: dict[int, list[int]] = {}
        for sid in sorted(assigned):
            a = schedule.assignments[sid]
            if a.day != day:
                continue
            s = instance.surgery(sid)
            lo, hi = max(0, a.start), min(total, a.start + s.duration)
            for t in range(lo, hi):
                ongoing[t] += 1
            counts = by_surgeon.setdefault(s.surgeon, [0] * total)
            for t in range(lo, hi):
                counts[t] += 1
            used[s.surgeon] = used.get(s.surgeon, 0) + s.duration
            if a.room is not None:
                if a.room < 1 or a.room > max(y, 0):
                    out.append(Violation("room-range", day, a.start, sid, 1))
                else:
                    counts = by_room.setdefault(a.room, [0] * total)
                    for t in range(lo, hi):
                        counts[t] += 1

        conc = {t: ongoing[t] - y for t in range(total) if ongoing[t] > max(y, 0)}
        for slot, excess in _coalesce_runs(conc):
            out.append(Violation("concurrency", day, slot, None, excess))

        for surgeon in sorted(by_surgeon):
            counts = by_surgeon[surgeon]
            over = {t: counts[t] - 1 for t in range(total) if counts[t] > 1}
            for slot, excess in _coalesce_runs(over):
                out.append(Violation("surgeon-overlap", day, slot, surgeon, excess))
        for surgeon in sorted(used):
            a_ld = instance.availability(surgeon, day)
            if used[surgeon] > a_ld:
                out.append(
                    Violation("availability", day, None, surgeon, used[surgeon] - a_ld)
                )

        for room in sorted(by_room):
            counts = by_room[room]
            over = {t: counts[t] - 1 for t in range(total) if counts[t] > 1}
            for slot, excess in _coalesce_runs(over):
                out.append(Violation("room-conflict", day, slot, room, excess))

    if schedule.cost_breakdown is not None:
        b = schedule.cost_breakdown
        if b.total != b.postponement + b.or_opening + b.overtime:
            out.append(
                Violation(
                    "cost-breakdown",
                    None,
                    None,
                    None,
                    float(abs(b.total - (b.postponement + b.or_opening + b.overtime))),
                )
            )

    def key(v: Violation):
        return (
            v.tag,
            v.day if v.day is not None else -1,
            v.slot if v.slot is not None else -1,
            v.surgery if v.surgery is not None else -1,
        )

    return FeasibilityReport(tuple(sorted(out, key=key)))


def recover_rooms(schedule: Schedule, instance: Instance) -> Schedule:
    """Assign explicit rooms to a roomless schedule.

    Forward greedy: within each day, place assignments in start order
    into the lowest-index room that is free.  Succeeds whenever the
    concurrency profile respects rooms_open (the interval-graph
    argument), and never changes cost.
    """
    new_assignments = dict(schedule.assignments)
    for day in range(1, instance.num_days + 1):
        todays = [
            (a.start, sid)
            for sid, a in schedule.assignments.items()
            if a.day == day
        ]
        todays.sort()
        y = schedule.rooms_open.get(day, 0)
        room_free_at = [0] * y  # next free slot per room
        for start, sid in todays:
            dur = instance.surgery(sid).duration
            for r in range(y):
                if room_free_at[r] <= start:
                    room_free_at[r] = start + dur
                    a = schedule.assignments[sid]
                    new_assignments[sid] = Assignment(a.day, a.start, r + 1)
                    break
            else:
                raise RoomRecoveryError(day, start)
    return Schedule(
        new_assignments, schedule.postponed, schedule.rooms_open, schedule.cost_breakdown
    )


def max_concurrency(
    placements: Iterable[tuple[int, int]], total_slots: int
) -> int:
    """Peak number of simultaneously running surgeries.

    placements is an iterable of (start, duration) pairs on one day.
    """
    profile = [0] * (total_slots + 1)
    for start, dur in placements:
        profile[max(0, start)] += 1
        profile[min(total_slots, start + dur)] -= 1
    peak = run = 0
    for delta in profile:
        run += delta
        peak = max(peak, run)
    return peak
