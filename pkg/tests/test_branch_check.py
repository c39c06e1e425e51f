import numpy as np
import pytest

from theatreplan.branch_check import (
    BcParams,
    _Master,
    feasibility_cut,
    optimality_cut,
    solve_bc,
    solve_day_subproblem,
)
from theatreplan.core import check_feasibility, evaluate
from theatreplan.optimizer import MipLimits, solve_mip

from conftest import oracle_suite_instance, tiny_instance
from oracle import enumerate_optimum


def force_assignment(master, day, assignment, forbid=()):
    """Pin master x variables so one specific day assignment is chosen."""
    overrides = {}
    for sid, k in assignment:
        overrides[master.x[(sid, day, k)]] = 1
    for sid, k in forbid:
        overrides[master.x[(sid, day, k)]] = 0
    for var, val in overrides.items():
        master.model.variables[var].lower = float(val)
        master.model.variables[var].upper = float(val)


class TestSubproblem:
    def test_clean_day_costs_zero(self):
        inst = tiny_instance(
            durations=[3, 2], due_days=[1, 1], surgeons=[1, 2], regular=8, rooms=2
        )
        sub = solve_day_subproblem(inst, 1, [(1, 1), (2, 1)], BcParams())
        assert sub.status == "optimal"
        assert sub.beta == pytest.approx(0.0, abs=1e-9)

    def test_overloaded_room_infeasible(self):
        # 7 + 7 slots in one room, day of 12 slots: no sequence fits
        inst = tiny_instance(
            durations=[7, 7], due_days=[1, 1], surgeons=[1, 2],
            regular=9, overtime=3, rooms=1,
            availability=((12,), (12,)),
        )
        sub = solve_day_subproblem(inst, 1, [(1, 1), (2, 1)], BcParams())
        assert sub.status == "infeasible"

    def test_surgeon_chain_overtime(self):
        # same surgeon in two rooms: sequencing forces the second one
        # past the regular boundary even though each room is light
        inst = tiny_instance(
            durations=[5, 5], due_days=[1, 1], surgeons=[1, 1],
            regular=6, overtime=6, rooms=2, availability=((12,),),
        )
        sub = solve_day_subproblem(inst, 1, [(1, 1), (2, 2)], BcParams())
        assert sub.status == "optimal"
        # second surgery runs [5, 10): 4 slots beyond the 6-slot boundary
        assert sub.beta == pytest.approx(4 * float(inst.costs.overtime_slot_cost))


class TestCuts:
    def _setup(self):
        inst = tiny_instance(
            durations=[7, 7], due_days=[1, 1], surgeons=[1, 2],
            regular=9, overtime=3, rooms=1,
            availability=((12,), (12,)),
        )
        return inst, _Master(inst)

    def test_feasibility_cut_shape(self):
        inst, master = self._setup()
        rows_before = master.model.num_constraints
        feasibility_cut(master, 1, [(1, 1), (2, 1)])
        con = master.model.constraints[-1]
        assert master.model.num_constraints == rows_before + 1
        assert len(con.coeffs) == 2
        assert con.rhs == 1.0  # sum x <= |A| - 1

    def test_feasibility_cut_excludes_assignment(self):
        inst = tiny_instance(
            durations=[5, 5], due_days=[1, 1], surgeons=[1, 1],
            regular=6, overtime=6, rooms=2, availability=((12,),),
        )
        master = _Master(inst)
        result = solve_mip(master.model, branch_priority=master.priority)
        assert result.status == "optimal"
        assignment = master.day_assignment(result.x, 1)
        feasibility_cut(master, 1, assignment)
        # the exact triple can never reappear
        force_assignment(master, 1, assignment)
        replay = solve_mip(master.model, branch_priority=master.priority)
        assert replay.status == "infeasible"

    def test_feasibility_cut_leaves_alternatives(self):
        inst = tiny_instance(
            durations=[5, 5], due_days=[1, 1], surgeons=[1, 1],
            regular=6, overtime=6, rooms=2, availability=((12,),),
        )
        master = _Master(inst)
        result = solve_mip(master.model, branch_priority=master.priority)
        first = master.day_assignment(result.x, 1)
        feasibility_cut(master, 1, first)
        replay = solve_mip(master.model, branch_priority=master.priority)
        assert replay.status == "optimal"
        assert master.day_assignment(replay.x, 1) != first

    def test_empty_assignment_no_cut(self):
        inst, master = self._setup()
        assert feasibility_cut(master, 1, []) is None

    def test_two_distinct_cuts(self):
        inst = tiny_instance(
            durations=[7, 7, 2], due_days=[1, 1, 1], surgeons=[1, 2, 3],
            regular=9, overtime=3, rooms=2,
            availability=((12,), (12,), (12,)),
        )
        master = _Master(inst)
        r1 = feasibility_cut(master, 1, [(1, 1), (2, 1)])
        r2 = feasibility_cut(master, 1, [(1, 2), (2, 2)])
        assert r1 != r2
        c1 = master.model.constraints[r1]
        c2 = master.model.constraints[r2]
        assert {idx for idx, _ in c1.coeffs} != {idx for idx, _ in c2.coeffs}

    def test_optimality_cut_binds_on_repeat(self):
        inst = tiny_instance(
            durations=[5, 5], due_days=[1, 1], surgeons=[1, 1],
            regular=6, overtime=6, rooms=2, availability=((12,),),
        )
        master = _Master(inst)
        assignment = [(1, 1), (2, 2)]
        beta = 4 * float(inst.costs.overtime_slot_cost)
        optimality_cut(master, 1, beta, assignment)
        force_assignment(master, 1, assignment)
        result = solve_mip(master.model, branch_priority=master.priority)
        assert result.status == "optimal"
        assert result.x[master.alpha[1]] >= beta - 1e-6

    def test_optimality_cut_inactive_on_change(self):
        inst = tiny_instance(
            durations=[5, 5], due_days=[1, 1], surgeons=[1, 1],
            regular=6, overtime=6, rooms=2, availability=((12,),),
        )
        master = _Master(inst)
        beta = 4 * float(inst.costs.overtime_slot_cost)
        optimality_cut(master, 1, beta, [(1, 1), (2, 2)])
        # same-room assignment instead: the cut must deactivate, so alpha
        # only carries the workload overflow (10 - 6 = 4 slots)
        force_assignment(master, 1, [(1, 1), (2, 1)])
        result = solve_mip(master.model, branch_priority=master.priority)
        assert result.status == "optimal"
        workload_alpha = 4 * float(inst.costs.overtime_slot_cost)
        assert result.x[master.alpha[1]] == pytest.approx(workload_alpha, abs=1e-6)


class TestSolveBc:
    def test_matches_oracle_on_suite(self):
        for seed in (0, 1, 2, 4, 7, 8):
            inst = oracle_suite_instance(seed)
            opt, osched = enumerate_optimum(inst)
            sched, stats = solve_bc(inst)
            if osched is None:
                assert not stats.solved
                continue
            assert stats.solved
            assert stats.upper_bound == pytest.approx(float(opt), abs=1e-6)
            assert check_feasibility(sched, inst).ok
            assert float(evaluate(sched, inst).total) == pytest.approx(
                stats.upper_bound, abs=1e-6
            )

    def test_cut_loop_exercised(self):
        # interleaved surgeon pairs: the workload bound underestimates the
        # sequencing overtime, so optimality cuts must fire before the
        # loop converges to the true optimum
        inst = tiny_instance(
            durations=[5, 5, 2, 2], due_days=[1, 1, 1, 1], surgeons=[1, 1, 2, 2],
            regular=6, overtime=4, rooms=2, availability=((10,), (10,)),
        )
        opt, osched = enumerate_optimum(inst)
        sched, stats = solve_bc(inst)
        assert stats.solved
        assert stats.upper_bound == pytest.approx(float(opt), abs=1e-6)
        assert stats.optimality_cuts >= 1

    def test_converges_without_cuts_on_easy_day(self):
        inst = tiny_instance(
            durations=[2, 2], due_days=[1, 1], surgeons=[1, 2], regular=8, rooms=2
        )
        sched, stats = solve_bc(inst)
        assert stats.solved
        assert stats.feasibility_cuts == 0 and stats.optimality_cuts == 0

    def test_stats_dict(self):
        inst = tiny_instance(durations=[2], due_days=[1], surgeons=[1], regular=4)
        _, stats = solve_bc(inst)
        d = stats.as_dict()
        assert {"nodes", "feasibility_cuts", "optimality_cuts", "solved"} <= set(d)
