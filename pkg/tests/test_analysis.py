from fractions import Fraction

import numpy as np
import pytest

from theatreplan.analysis import (
    Disruption,
    ExperimentConfig,
    KpiRecord,
    RescheduleInfeasibleError,
    apply_disruption,
    buffer_evaluate,
    buffer_grid,
    buffered_planning_instance,
    draw_duration_noise,
    reschedule,
    run_experiment,
    split_for_emergencies,
)
from theatreplan.core import Surgery, check_feasibility, evaluate
from theatreplan.errors import ValidationError
from theatreplan.instances import GenSpec, generate
from theatreplan.pipeline import solve_with_method

from conftest import tiny_instance


def coarse_spec(n=8, seed=7, **kw):
    defaults = dict(
        num_surgeries=n, num_days=3, num_surgeons=3, rooms_per_day=2,
        slot_minutes=30, regular_hours=8, overtime_hours=2, seed=seed,
    )
    defaults.update(kw)
    return GenSpec(**defaults)


@pytest.fixture(scope="module")
def solved_baseline():
    base = generate(coarse_spec())
    outcome = solve_with_method(base, "pmiorps", seed=1, time_limit=60)
    assert outcome.schedule is not None
    return base, outcome.schedule


class TestDisruption:
    def test_emergency_due_must_match_arrival(self):
        with pytest.raises(ValidationError):
            Disruption(
                "emergency_arrivals",
                arrival_day=3,
                new_surgeries=(Surgery(id=1, duration=4, due_day=2, surgeon=1),),
            )

    def test_tightening_must_shrink(self):
        inst = tiny_instance(durations=[2], due_days=[2], surgeons=[1], num_days=2)
        with pytest.raises(ValidationError):
            apply_disruption(
                inst, Disruption("due_date_tightening", tightened=((1, 3),))
            )

    def test_apply_appends_and_retargets(self):
        inst = tiny_instance(
            durations=[2, 2], due_days=[2, 9], surgeons=[1, 1], num_days=2, regular=8
        )
        d = Disruption(
            "emergency_arrivals",
            arrival_day=2,
            new_surgeries=(Surgery(id=0, duration=3, due_day=2, surgeon=1),),
            tightened=((2, 1),),
        )
        out = apply_disruption(inst, d)
        assert len(out.surgeries) == 3
        assert out.surgery(3).due_day == 2
        assert out.surgery(2).due_day == 1


class TestReschedule:
    def test_empty_disruption_zero_delta(self, solved_baseline):
        base, schedule = solved_baseline
        resched, kpi = reschedule(schedule, base, Disruption.none(), freeze_days=2)
        assert kpi.delta_pct == 0.0
        assert resched.cost_breakdown.total == schedule.cost_breakdown.total

    def test_full_freeze_identity(self, solved_baseline):
        base, schedule = solved_baseline
        resched, kpi = reschedule(
            schedule, base, Disruption.none(), freeze_days=base.num_days
        )
        assert resched.assignments == schedule.assignments
        assert kpi.delta_pct == 0.0

    def test_frozen_assignments_bit_identical(self, solved_baseline):
        base, schedule = solved_baseline
        rng = np.random.default_rng(5)
        smaller, disruption = split_for_emergencies(base, 2, 3, rng)
        outcome = solve_with_method(smaller, "pmiorps", seed=1, time_limit=60)
        resched, kpi = reschedule(outcome.schedule, smaller, disruption, freeze_days=2)
        frozen = {
            sid: a for sid, a in outcome.schedule.assignments.items() if a.day <= 2
        }
        for sid, a in frozen.items():
            assert resched.assignments[sid] == a
        assert kpi.delta_pct >= 0.0

    def test_emergencies_never_postpone_frozen(self, solved_baseline):
        base, schedule = solved_baseline
        rng = np.random.default_rng(9)
        smaller, disruption = split_for_emergencies(base, 2, 3, rng)
        outcome = solve_with_method(smaller, "pmiorps", seed=1, time_limit=60)
        resched, _ = reschedule(outcome.schedule, smaller, disruption, freeze_days=2)
        frozen_ids = {
            sid for sid, a in outcome.schedule.assignments.items() if a.day <= 2
        }
        assert not (frozen_ids & resched.postponed)

    def test_rescheduled_feasible_for_disrupted_instance(self, solved_baseline):
        base, schedule = solved_baseline
        rng = np.random.default_rng(11)
        smaller, disruption = split_for_emergencies(base, 3, 3, rng)
        outcome = solve_with_method(smaller, "pmiorps", seed=1, time_limit=60)
        resched, _ = reschedule(outcome.schedule, smaller, disruption, freeze_days=2)
        disrupted = apply_disruption(smaller, disruption)
        assert check_feasibility(resched, disrupted).ok

    def test_tightening_into_frozen_window_reports_surgery(self, solved_baseline):
        base, schedule = solved_baseline
        victim = None
        for sid, a in schedule.assignments.items():
            if a.day == 3 and base.surgery(sid).due_day > 3:
                victim = sid
                break
        if victim is None:
            pytest.skip("no surgery scheduled on day 3 with late due date")
        disruption = Disruption("due_date_tightening", tightened=((victim, 2),))
        with pytest.raises(RescheduleInfeasibleError) as err:
            reschedule(schedule, base, disruption, freeze_days=2)
        assert err.value.surgery_id == victim

    def test_emergency_inside_freeze_rejected(self, solved_baseline):
        base, schedule = solved_baseline
        d = Disruption(
            "emergency_arrivals",
            arrival_day=2,
            new_surgeries=(Surgery(id=0, duration=2, due_day=2, surgeon=1),),
        )
        with pytest.raises(ValidationError):
            reschedule(schedule, base, d, freeze_days=2)


class TestBuffer:
    def test_zero_noise_zero_buffer_identity(self):
        inst = generate(coarse_spec(16, seed=8))

        class ZeroNoise:
            pass

        out = buffer_evaluate(inst, 0, noise_seed=0)
        # override: re-evaluate with eps forced to zero via spread monkey
        from theatreplan import analysis

        eps = draw_duration_noise(inst, 0, spread=0.0)
        assert all(v == 0 for v in eps.values())
        planned_total = out.planned.cost_breakdown.total
        # replay with zero spread: realized == planned
        from theatreplan.analysis import default_buffer_solver

        planned = default_buffer_solver(inst)
        assert planned_total == planned.cost_breakdown.total

    def test_buffered_instance_shape(self):
        inst = generate(GenSpec(num_surgeries=10, seed=1))
        buffered = buffered_planning_instance(inst, 60)
        assert buffered.regular_slots == inst.regular_slots - 12
        assert buffered.overtime_slots == inst.overtime_slots
        assert max(max(r) for r in buffered.surgeon_availability) <= buffered.total_slots

    def test_buffer_must_divide_slots(self):
        inst = generate(GenSpec(num_surgeries=10, seed=1))
        with pytest.raises(ValidationError):
            buffered_planning_instance(inst, 17)

    def test_shared_noise_monotone_overtime(self):
        for seed in (3, 7, 21):
            inst = generate(GenSpec(num_surgeries=40, seed=seed))
            outs = buffer_grid(inst, noise_seed=seed)
            ovts = [o.kpi.overtime for o in outs]
            assert all(b <= a for a, b in zip(ovts, ovts[1:])), (seed, ovts)

    def test_planned_regular_usage_respects_buffer(self):
        inst = generate(GenSpec(num_surgeries=30, seed=4))
        for b in (30, 90):
            out = buffer_evaluate(inst, b, noise_seed=1)
            slots = b // inst.slot_minutes
            reg = inst.regular_slots - slots
            for sid, a in out.planned.assignments.items():
                dur = inst.surgery(sid).duration
                # every placement fits the shrunken day, and anything
                # past the moved boundary is priced as planned overtime
                assert a.start + dur <= inst.total_slots - slots

    def test_kpi_composition(self):
        inst = generate(GenSpec(num_surgeries=20, seed=6))
        out = buffer_evaluate(inst, 30, noise_seed=2)
        k = out.kpi
        assert k.total == k.postponement + k.or_opening + k.overtime


class TestExperiment:
    def test_single_cell_grid(self):
        cfg = ExperimentConfig(
            instances=[coarse_spec(10, seed=2)], methods=["edd"], seed=1
        )
        rows = run_experiment(cfg)
        assert len(rows) == 1
        assert rows[0]["kind"] == "solve"
        assert rows[0]["status"] in ("ok", "no-solution")

    def test_deterministic_rows(self):
        cfg = ExperimentConfig(
            instances=[coarse_spec(10, seed=2)],
            methods=["edd", "spt"],
            buffers=[0, 60],
            seed=5,
        )
        rows1 = run_experiment(cfg)
        rows2 = run_experiment(cfg)
        assert rows1 == rows2

    def test_failures_become_rows(self):
        cfg = ExperimentConfig(
            instances=[coarse_spec(10, seed=2)], methods=["lpt", "edd"], seed=1
        )
        rows = run_experiment(cfg)
        assert len(rows) == 2  # even if one rule fails, both rows exist

    def test_buffer_rows_share_noise(self):
        cfg = ExperimentConfig(
            instances=[GenSpec(num_surgeries=30, seed=9)],
            methods=[],
            buffers=[0, 30, 60, 90, 120],
            seed=3,
        )
        rows = run_experiment(cfg)
        buffer_rows = [r for r in rows if r["kind"] == "buffer"]
        assert len(buffer_rows) == 5
        ovts = [r["overtime"] for r in buffer_rows]
        assert all(b <= a + 1e-9 for a, b in zip(ovts, ovts[1:]))
