import io
import json
from fractions import Fraction

import numpy as np
import pytest

from theatreplan.core import Assignment, Schedule, evaluate
from theatreplan.errors import FormatError, InputError, ValidationError
from theatreplan.instances import (
    GenSpec,
    generate,
    instance_hash,
    instance_to_dict,
    load_instance,
    load_solution,
    load_surgeries_csv,
    save_instance,
    save_solution,
    solution_hash,
)


class TestGenerate:
    def test_default_grid_matches_paper_shape(self):
        inst = generate(GenSpec(num_surgeries=40, seed=1))
        assert inst.regular_slots == 96
        assert inst.overtime_slots == 24
        assert inst.costs.overtime_slot_cost == Fraction(1000, 24)
        assert inst.costs.postponement_cost == 500

    def test_availability_pattern_first_surgeon_monday(self):
        inst = generate(GenSpec(num_surgeries=10, seed=3))
        # 8 hours at 5-minute slots
        assert inst.availability(1, 1) == 96
        assert inst.availability(1, 2) == 0
        assert inst.availability(2, 4) == 72  # 6h

    def test_tiling_beyond_pattern(self):
        inst = generate(GenSpec(num_surgeries=5, num_days=7, num_surgeons=10, seed=5))
        assert inst.availability(9, 1) == inst.availability(1, 1)
        assert inst.availability(1, 6) == inst.availability(1, 1)

    def test_determinism(self):
        a = generate(GenSpec(num_surgeries=30, seed=7))
        b = generate(GenSpec(num_surgeries=30, seed=7))
        assert instance_to_dict(a) == instance_to_dict(b)
        c = generate(GenSpec(num_surgeries=30, seed=8))
        assert instance_to_dict(a) != instance_to_dict(c)

    def test_durations_in_range_and_mean(self):
        inst = generate(
            GenSpec(num_surgeries=10_000, num_days=5, seed=42, ensure_feasible=False)
        )
        minutes = np.array([s.duration * inst.slot_minutes for s in inst.surgeries])
        assert minutes.min() >= 30 and minutes.max() <= 230
        assert abs(minutes.mean() - 130.45) < 5

    def test_due_days_in_range(self):
        inst = generate(GenSpec(num_surgeries=500, seed=2))
        dues = [s.due_day for s in inst.surgeries]
        assert min(dues) >= 1 and max(dues) <= 14

    def test_round_robin_surgeons(self):
        inst = generate(GenSpec(num_surgeries=10, num_surgeons=4, seed=1))
        assert [s.surgeon for s in inst.surgeries] == [1, 2, 3, 4, 1, 2, 3, 4, 1, 2]

    def test_generated_instance_valid(self):
        inst = generate(GenSpec(num_surgeries=60, seed=9))
        assert inst.num_days == 5
        assert len(inst.rooms_per_day) == 5

    def test_spec_errors(self):
        with pytest.raises(ValidationError):
            GenSpec(num_surgeries=0)
        with pytest.raises(ValidationError):
            GenSpec(num_surgeries=5, num_surgeons=0)
        with pytest.raises(ValidationError):
            GenSpec(num_surgeries=5, duration_range=(100, 50))


class TestInstanceIO:
    def test_json_roundtrip(self, tmp_path, small_gen_instance):
        p = tmp_path / "inst.json"
        save_instance(small_gen_instance, p)
        again = load_instance(p)
        assert instance_to_dict(again) == instance_to_dict(small_gen_instance)
        assert instance_hash(again) == instance_hash(small_gen_instance)

    def test_csv_row_unit_conversion(self):
        surgeries = load_surgeries_csv(io.StringIO("1,120,3,2\n"), slot_minutes=5)
        assert surgeries[0].duration == 24
        assert surgeries[0].due_day == 3
        assert surgeries[0].surgeon == 2

    def test_csv_duplicate_id(self):
        with pytest.raises(ValidationError):
            load_surgeries_csv(io.StringIO("1,120,3,2\n1,60,2,1\n"))

    def test_csv_schema_error_reports_line(self):
        with pytest.raises(InputError) as err:
            load_surgeries_csv(io.StringIO("1,120,3\n"))
        assert "line 1" in str(err.value)

    def test_csv_bad_duration(self):
        with pytest.raises(InputError):
            load_surgeries_csv(io.StringIO("1,17,3,2\n"), slot_minutes=5)

    def test_format_version_mismatch(self, tmp_path, small_gen_instance):
        p = tmp_path / "inst.json"
        save_instance(small_gen_instance, p)
        data = json.loads(p.read_text())
        data["version"] = 99
        p.write_text(json.dumps(data))
        with pytest.raises(FormatError):
            load_instance(p)


class TestSolutionIO:
    def _schedule(self):
        return Schedule(
            {1: Assignment(1, 0, 1), 2: Assignment(2, 3, 1)},
            frozenset({3}),
            {1: 1, 2: 1, 3: 0},
        )

    def test_roundtrip(self, tmp_path, small_gen_instance):
        sched = self._schedule().with_costs(evaluate(self._schedule(), small_gen_instance))
        p = tmp_path / "sol.json"
        save_solution(sched, p, small_gen_instance)
        again = load_solution(p, small_gen_instance)
        assert again.assignments == sched.assignments
        assert again.postponed == sched.postponed
        assert again.rooms_open == sched.rooms_open
        assert again.cost_breakdown == sched.cost_breakdown
        assert solution_hash(again) == solution_hash(sched)

    def test_hash_cross_reference(self, tmp_path, small_gen_instance):
        p = tmp_path / "sol.json"
        save_solution(self._schedule(), p, small_gen_instance)
        from theatreplan.instances import GenSpec, generate

        other = generate(GenSpec(num_surgeries=12, num_days=3, rooms_per_day=2, seed=999))
        with pytest.raises(FormatError):
            load_solution(p, other)

    def test_empty_schedule_roundtrip(self, tmp_path, small_gen_instance):
        empty = Schedule({}, frozenset(), {})
        p = tmp_path / "sol.json"
        save_solution(empty, p, small_gen_instance)
        again = load_solution(p, small_gen_instance)
        assert again.assignments == {}
        assert again.postponed == frozenset()
