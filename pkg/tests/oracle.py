"""Independent brute-force oracle used by the test suite.

Enumerates every (postpone | day, start) choice per surgery with
depth-first search, pruning on partial cost.  Kept deliberately free
of any solver code: feasibility is re-derived from first principles
(slot occupancy, surgeon overlap, surgeon budget) and the cost is the
plain objective with y_d = peak concurrency per day.
"""

from __future__ import annotations

from fractions import Fraction

from theatreplan.core import Assignment, Instance, Schedule, overtime_cost


def enumerate_optimum(instance: Instance) -> tuple[Fraction, Schedule | None]:
    """Optimal total cost and one optimal schedule (None if infeasible)."""
    total = instance.total_slots
    days = instance.num_days
    costs = instance.costs
    surgeries = instance.surgeries
    n = len(surgeries)

    occupancy = [[0] * total for _ in range(days)]  # ongoing count per slot
    peak = [0] * days
    surgeon_busy = {}  # (surgeon, day) -> slot occupancy list
    surgeon_used = {}  # (surgeon, day) -> slots used

    best = {"cost": None, "choice": None}
    choice: list[tuple | None] = [None] * n

    def place_ok(s, day_idx, start):
        occ = occupancy[day_idx]
        cap = instance.rooms_per_day[day_idx]
        for t in range(start, start + s.duration):
            if occ[t] + 1 > cap:
                return False
        busy = surgeon_busy.get((s.surgeon, day_idx))
        if busy is not None:
            for t in range(start, start + s.duration):
                if busy[t]:
                    return False
        used = surgeon_used.get((s.surgeon, day_idx), 0)
        if used + s.duration > instance.surgeon_availability[s.surgeon - 1][day_idx]:
            return False
        return True

    def dfs(idx, cost):
        if best["cost"] is not None and cost >= best["cost"]:
            return
        if idx == n:
            best["cost"] = cost
            best["choice"] = list(choice)
            return
        s = surgeries[idx]
        for day in range(1, min(s.due_day, days) + 1):
            di = day - 1
            for start in range(0, total - s.duration + 1):
                if not place_ok(s, di, start):
                    continue
                occ = occupancy[di]
                for t in range(start, start + s.duration):
                    occ[t] += 1
                old_peak = peak[di]
                new_peak = max(old_peak, max(occ[start : start + s.duration]))
                peak[di] = new_peak
                busy = surgeon_busy.setdefault((s.surgeon, di), [0] * total)
                for t in range(start, start + s.duration):
                    busy[t] = 1
                surgeon_used[(s.surgeon, di)] = surgeon_used.get((s.surgeon, di), 0) + s.duration

                delta = costs.or_open_cost * (new_peak - old_peak) + overtime_cost(
                    start, s.duration, instance.regular_slots, costs.overtime_slot_cost
                )
                choice[idx] = (day, start)
                dfs(idx + 1, cost + delta)
                choice[idx] = None

                for t in range(start, start + s.duration):
                    occ[t] -= 1
                    busy[t] = 0
                peak[di] = old_peak
                surgeon_used[(s.surgeon, di)] -= s.duration
        if s.due_day > days:  # elective: postponement allowed
            choice[idx] = "postponed"
            dfs(idx + 1, cost + costs.postponement_cost)
            choice[idx] = None

    dfs(0, Fraction(0))
    if best["cost"] is None:
        return Fraction(0), None

    assignments = {}
    postponed = set()
    per_day_placements = {d: [] for d in range(1, days + 1)}
    for idx, ch in enumerate(best["choice"]):
        sid = surgeries[idx].id
        if ch == "postponed":
            postponed.add(sid)
        else:
            day, start = ch
            assignments[sid] = Assignment(day, start)
            per_day_placements[day].append((start, surgeries[idx].duration))
    rooms_open = {}
    for d in range(1, days + 1):
        profile = [0] * (total + 1)
        for start, dur in per_day_placements[d]:
            profile[start] += 1
            profile[start + dur] -= 1
        run = 0
        peak_d = 0
        for delta in profile:
            run += delta
            peak_d = max(peak_d, run)
        rooms_open[d] = peak_d
    schedule = Schedule(assignments, frozenset(postponed), rooms_open)
    return best["cost"], schedule
