"""Synthetic instance generation, file formats and content hashing.

The generator mirrors the usual benchmark recipe: durations uniform
on [30, 230] minutes in slot-size steps, due days uniform on [1, 14],
an 8-surgeon weekly availability pattern, and the 1000 / 1000-per-
overtime-shift / 500 cost structure.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .core import Assignment, CostBreakdown, CostParams, Instance, Schedule, Surgery
from .errors import FormatError, InputError, ValidationError
from .money import as_money, money_repr

INSTANCE_FORMAT = "theatreplan-instance"
SOLUTION_FORMAT = "theatreplan-solution"
FORMAT_VERSION = 1

# Weekly availability pattern, hours per surgeon per weekday.
AVAILABILITY_HOURS = (
    (8, 0, 7, 0, 6),
    (8, 4, 5, 6, 5),
    (8, 3, 6, 7, 8),
    (5, 3, 4, 8, 8),
    (6, 5, 0, 6, 8),
    (6, 0, 5, 7, 8),
    (0, 6, 6, 6, 8),
    (0, 6, 6, 8, 8),
)


@dataclass(frozen=True)
class GenSpec:
    """Parameters of the synthetic generator; the seed fixes everything."""

    num_surgeries: int
    num_days: int = 5
    num_surgeons: int = 8
    rooms_per_day: Union[int, Sequence[int]] = 5
    duration_range: tuple[int, int] = (30, 230)
    due_day_range: tuple[int, int] = (1, 14)
    slot_minutes: int = 5
    regular_hours: int = 8
    overtime_hours: int = 2
    seed: int = 0
    surgeon_assignment: str = "round_robin"  # or "random"
    ensure_feasible: bool = True

    def __post_init__(self):
        if self.num_surgeries < 1:
            raise ValidationError("num_surgeries must be >= 1")
        if self.num_days < 1:
            raise ValidationError("num_days must be >= 1")
        if self.num_surgeons < 1:
            raise ValidationError("num_surgeons must be >= 1")
        lo, hi = self.duration_range
        if lo > hi or lo < 1:
            raise ValidationError("duration_range must satisfy 1 <= lo <= hi")
        dlo, dhi = self.due_day_range
        if dlo > dhi:
            raise ValidationError("due_day_range must satisfy lo <= hi")
        if self.slot_minutes < 1 or (self.regular_hours * 60) % self.slot_minutes:
            raise ValidationError("slot_minutes must divide the regular shift")
        if self.surgeon_assignment not in ("round_robin", "random"):
            raise ValidationError("surgeon_assignment must be round_robin or random")

    @property
    def rooms(self) -> tuple[int, ...]:
        if isinstance(self.rooms_per_day, int):
            return (self.rooms_per_day,) * self.num_days
        return tuple(self.rooms_per_day)


def generate(spec: GenSpec) -> Instance:
    """Draw an instance; a pure function of the spec (seed included)."""
    rng = np.random.default_rng(spec.seed)
    regular = spec.regular_hours * 60 // spec.slot_minutes
    overtime = spec.overtime_hours * 60 // spec.slot_minutes
    total = regular + overtime

    lo, hi = spec.duration_range
    lo_steps = max(1, -(-lo // spec.slot_minutes))  # ceil
    hi_steps = max(lo_steps, hi // spec.slot_minutes)
    durations = rng.integers(lo_steps, hi_steps + 1, size=spec.num_surgeries)

    dlo, dhi = spec.due_day_range
    due_days = rng.integers(max(1, dlo), max(1, dhi) + 1, size=spec.num_surgeries)

    if spec.surgeon_assignment == "round_robin":
        surgeons = [(i % spec.num_surgeons) + 1 for i in range(spec.num_surgeries)]
    else:
        surgeons = list(rng.integers(1, spec.num_surgeons + 1, size=spec.num_surgeries))

    slots_per_hour = 60 // spec.slot_minutes if 60 % spec.slot_minutes == 0 else None
    availability = []
    for l in range(spec.num_surgeons):
        row = []
        for d in range(spec.num_days):
            hours = AVAILABILITY_HOURS[l % 8][d % 5]
            if slots_per_hour is not None:
                slots = hours * slots_per_hour
            else:
                slots = (hours * 60) // spec.slot_minutes
            row.append(min(slots, total))
        availability.append(tuple(row))

    surgery_list = []
    for i in range(spec.num_surgeries):
        dur = int(min(durations[i], total))
        due = int(due_days[i])
        surgeon = int(surgeons[i])
        if spec.ensure_feasible and due <= spec.num_days:
            # a mandatory surgery must fit inside its surgeon's calendar;
            # push the due date to the first day with enough availability,
            # or make the surgery elective if no day ever fits
            feasible_days = [
                d + 1
                for d in range(spec.num_days)
                if availability[surgeon - 1][d] >= dur
            ]
            if not any(d <= due for d in feasible_days):
                due = feasible_days[0] if feasible_days else max(dhi, spec.num_days + 1)
        surgery_list.append(
            Surgery(id=i + 1, duration=dur, due_day=due, surgeon=surgeon)
        )
    surgeries = tuple(surgery_list)
    costs = CostParams(
        or_open_cost=Fraction(1000),
        overtime_slot_cost=Fraction(1000, overtime) if overtime else Fraction(0),
        postponement_cost=Fraction(500),
    )
    instance = Instance(
        surgeries=surgeries,
        num_days=spec.num_days,
        regular_slots=regular,
        overtime_slots=overtime,
        rooms_per_day=spec.rooms,
        surgeon_availability=tuple(availability),
        costs=costs,
        slot_minutes=spec.slot_minutes,
    )
    if spec.ensure_feasible:
        instance = _repair_mandatory_load(instance, max(dhi, spec.num_days + 1))
    return instance


def _repair_mandatory_load(instance: Instance, elective_due: int) -> Instance:
    """Relax due dates until the due-date-ordered first-fit decode succeeds.

    Generated calendars can overload a surgeon or a day with mandatory
    work; benchmark instances are expected to admit a feasible plan, so
    the offending surgery's deadline is pushed out (eventually past the
    horizon, which makes it postponable).
    """
    from .heuristics import first_fit_decode  # local import, no cycle at module load

    for _ in range(len(instance.surgeries) * (instance.num_days + 1)):
        mandatory = sorted(
            instance.mandatory_ids,
            key=lambda i: (instance.surgery(i).due_day, instance.surgery(i).duration, i),
        )
        elective = sorted(
            instance.elective_ids,
            key=lambda i: (instance.surgery(i).due_day, instance.surgery(i).duration, i),
        )
        result = first_fit_decode(mandatory, elective, instance)
        if result.ok:
            return instance
        sid = result.failed_surgery
        updated = []
        for s in instance.surgeries:
            if s.id == sid:
                new_due = s.due_day + 1 if s.due_day < instance.num_days else elective_due
                updated.append(
                    Surgery(id=s.id, duration=s.duration, due_day=new_due, surgeon=s.surgeon)
                )
            else:
                updated.append(s)
        instance = Instance(
            surgeries=tuple(updated),
            num_days=instance.num_days,
            regular_slots=instance.regular_slots,
            overtime_slots=instance.overtime_slots,
            rooms_per_day=instance.rooms_per_day,
            surgeon_availability=instance.surgeon_availability,
            costs=instance.costs,
            slot_minutes=instance.slot_minutes,
        )
    return instance


# ---------------------------------------------------------------------------
# instance JSON


def instance_to_dict(instance: Instance) -> dict:
    return {
        "format": INSTANCE_FORMAT,
        "version": FORMAT_VERSION,
        "num_days": instance.num_days,
        "regular_slots": instance.regular_slots,
        "overtime_slots": instance.overtime_slots,
        "slot_minutes": instance.slot_minutes,
        "rooms_per_day": list(instance.rooms_per_day),
        "costs": {
            "or_open": money_repr(instance.costs.or_open_cost),
            "overtime_slot": money_repr(instance.costs.overtime_slot_cost),
            "postponement": money_repr(instance.costs.postponement_cost),
        },
        "surgeon_availability": [list(r) for r in instance.surgeon_availability],
        "surgeries": [
            {
                "id": s.id,
                "duration": s.duration,
                "due_day": s.due_day,
                "surgeon": s.surgeon,
            }
            for s in instance.surgeries
        ],
    }


def instance_from_dict(data: dict) -> Instance:
    if data.get("format") != INSTANCE_FORMAT:
        raise FormatError("not a theatreplan instance file")
    if data.get("version") != FORMAT_VERSION:
        raise FormatError(f"unsupported instance version {data.get('version')}")
    try:
        surgeries = tuple(
            Surgery(
                id=int(s["id"]),
                duration=int(s["duration"]),
                due_day=int(s["due_day"]),
                surgeon=int(s["surgeon"]),
            )
            for s in data["surgeries"]
        )
        costs = CostParams(
            or_open_cost=as_money(data["costs"]["or_open"]),
            overtime_slot_cost=as_money(data["costs"]["overtime_slot"]),
            postponement_cost=as_money(data["costs"]["postponement"]),
        )
        return Instance(
            surgeries=surgeries,
            num_days=int(data["num_days"]),
            regular_slots=int(data["regular_slots"]),
            overtime_slots=int(data["overtime_slots"]),
            rooms_per_day=tuple(int(k) for k in data["rooms_per_day"]),
            surgeon_availability=tuple(
                tuple(int(a) for a in row) for row in data["surgeon_availability"]
            ),
            costs=costs,
            slot_minutes=int(data.get("slot_minutes", 5)),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed instance file: missing {exc}") from exc


def instance_hash(instance: Instance) -> str:
    payload = json.dumps(instance_to_dict(instance), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def save_instance(instance: Instance, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=2) + "\n")


def load_instance(source, format: str = "json", **grid) -> Instance:
    """Load an instance from a path or stream.

    format='json' reads the canonical schema.  format='csv' reads a
    surgery list (surgery_id, duration_minutes, due_day, surgeon_id);
    the day grid, rooms and costs come from keyword arguments with
    generator defaults.
    """
    if format == "json":
        if hasattr(source, "read"):
            data = json.load(source)
        else:
            data = json.loads(Path(source).read_text())
        return instance_from_dict(data)
    if format == "csv":
        surgeries = load_surgeries_csv(source, grid.get("slot_minutes", 5))
        return build_instance_from_surgeries(surgeries, **grid)
    raise InputError(f"unknown instance format {format!r}")


def load_surgeries_csv(source, slot_minutes: int = 5) -> list[Surgery]:
    """Parse surgery rows; duration is given in minutes and converted to slots."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text()
    rows = list(csv.reader(io.StringIO(text)))
    surgeries: list[Surgery] = []
    seen: set[int] = set()
    for lineno, row in enumerate(rows, start=1):
        if not row or row[0].strip().startswith("#"):
            continue
        if row[0].strip().lower() in ("surgery_id", "id"):
            continue  # header
        if len(row) != 4:
            raise InputError(f"csv line {lineno}: expected 4 fields, got {len(row)}")
        try:
            sid = int(row[0])
            minutes = int(row[1])
            due = int(row[2])
            surgeon = int(row[3])
        except ValueError as exc:
            raise InputError(f"csv line {lineno}: {exc}") from exc
        if minutes < 1 or minutes % slot_minutes:
            raise InputError(
                f"csv line {lineno}: duration {minutes} not a positive multiple "
                f"of {slot_minutes} minutes"
            )
        if sid in seen:
            raise ValidationError(f"csv line {lineno}: duplicate surgery id {sid}")
        seen.add(sid)
        surgeries.append(
            Surgery(id=sid, duration=minutes // slot_minutes, due_day=due, surgeon=surgeon)
        )
    surgeries.sort(key=lambda s: s.id)
    return surgeries


def build_instance_from_surgeries(
    surgeries: Sequence[Surgery],
    num_days: int = 5,
    num_surgeons: Optional[int] = None,
    rooms_per_day: Union[int, Sequence[int]] = 5,
    slot_minutes: int = 5,
    regular_hours: int = 8,
    overtime_hours: int = 2,
    costs: Optional[CostParams] = None,
    **_ignored,
) -> Instance:
    regular = regular_hours * 60 // slot_minutes
    overtime = overtime_hours * 60 // slot_minutes
    total = regular + overtime
    if num_surgeons is None:
        num_surgeons = max(s.surgeon for s in surgeries)
    slots_per_hour = 60 // slot_minutes if 60 % slot_minutes == 0 else None
    availability = tuple(
        tuple(
            min(
                (AVAILABILITY_HOURS[l % 8][d % 5] * slots_per_hour)
                if slots_per_hour is not None
                else (AVAILABILITY_HOURS[l % 8][d % 5] * 60) // slot_minutes,
                total,
            )
            for d in range(num_days)
        )
        for l in range(num_surgeons)
    )
    if isinstance(rooms_per_day, int):
        rooms = (rooms_per_day,) * num_days
    else:
        rooms = tuple(rooms_per_day)
    if costs is None:
        costs = CostParams(
            or_open_cost=Fraction(1000),
            overtime_slot_cost=Fraction(1000, overtime) if overtime else Fraction(0),
            postponement_cost=Fraction(500),
        )
    return Instance(
        surgeries=tuple(surgeries),
        num_days=num_days,
        regular_slots=regular,
        overtime_slots=overtime,
        rooms_per_day=rooms,
        surgeon_availability=availability,
        costs=costs,
        slot_minutes=slot_minutes,
    )


# ---------------------------------------------------------------------------
# solution JSON


def _breakdown_to_dict(b: CostBreakdown) -> dict:
    return {
        "postponement": money_repr(b.postponement),
        "or_opening": money_repr(b.or_opening),
        "overtime": money_repr(b.overtime),
        "total": money_repr(b.total),
    }


def _breakdown_from_dict(d: dict) -> CostBreakdown:
    return CostBreakdown(
        as_money(d["postponement"]),
        as_money(d["or_opening"]),
        as_money(d["overtime"]),
        as_money(d["total"]),
    )


def schedule_to_dict(schedule: Schedule, instance: Optional[Instance] = None) -> dict:
    return {
        "format": SOLUTION_FORMAT,
        "version": FORMAT_VERSION,
        "instance_hash": instance_hash(instance) if instance is not None else None,
        "assignments": [
            {
                "surgery": sid,
                "day": a.day,
                "start": a.start,
                "room": a.room,
            }
            for sid, a in sorted(schedule.assignments.items())
        ],
        "postponed": sorted(schedule.postponed),
        "rooms_open": {str(d): y for d, y in sorted(schedule.rooms_open.items())},
        "cost_breakdown": (
            _breakdown_to_dict(schedule.cost_breakdown)
            if schedule.cost_breakdown is not None
            else None
        ),
    }


def schedule_from_dict(data: dict, instance: Optional[Instance] = None) -> Schedule:
    if data.get("format") != SOLUTION_FORMAT:
        raise FormatError("not a theatreplan solution file")
    if data.get("version") != FORMAT_VERSION:
        raise FormatError(f"unsupported solution version {data.get('version')}")
    if instance is not None and data.get("instance_hash") is not None:
        if data["instance_hash"] != instance_hash(instance):
            raise FormatError("solution does not reference this instance (hash mismatch)")
    assignments = {
        int(a["surgery"]): Assignment(int(a["day"]), int(a["start"]),
                                      None if a.get("room") is None else int(a["room"]))
        for a in data["assignments"]
    }
    breakdown = data.get("cost_breakdown")
    return Schedule(
        assignments=assignments,
        postponed=frozenset(int(i) for i in data["postponed"]),
        rooms_open={int(d): int(y) for d, y in data["rooms_open"].items()},
        cost_breakdown=_breakdown_from_dict(breakdown) if breakdown else None,
    )


def save_solution(
    schedule: Schedule, path: Union[str, Path], instance: Optional[Instance] = None
) -> None:
    Path(path).write_text(json.dumps(schedule_to_dict(schedule, instance), indent=2) + "\n")


def load_solution(path: Union[str, Path], instance: Optional[Instance] = None) -> Schedule:
    data = json.loads(Path(path).read_text())
    return schedule_from_dict(data, instance)


def solution_hash(schedule: Schedule) -> str:
    """Content hash used for determinism checks and service ids."""
    payload = json.dumps(schedule_to_dict(schedule), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()
