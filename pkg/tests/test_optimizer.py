import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from theatreplan.optimizer import (
    EQUAL,
    GREATER,
    LESS,
    LinearModel,
    MipLimits,
    solve_lp,
    solve_mip,
    to_lp_string,
)


def random_lp(rng):
    n = int(rng.integers(1, 9))
    mrows = int(rng.integers(0, 8))
    c = rng.normal(size=n).round(3)
    lo = rng.uniform(-5, 0, size=n).round(3)
    hi = lo + rng.uniform(0, 8, size=n).round(3)
    model = LinearModel()
    for j in range(n):
        model.add_variable(f"x{j}", lo[j], hi[j], obj=c[j])
    scipy_args = {"A_ub": [], "b_ub": [], "A_eq": [], "b_eq": []}
    senses = [LESS, GREATER, EQUAL]
    for _ in range(mrows):
        row = np.where(rng.random(n) < 0.6, rng.normal(size=n).round(3), 0.0)
        sense = senses[int(rng.integers(0, 3))]
        rhs = float(rng.normal() * 3)
        model.add_constraint([(j, row[j]) for j in range(n) if row[j] != 0], sense, rhs)
        if sense == LESS:
            scipy_args["A_ub"].append(row)
            scipy_args["b_ub"].append(rhs)
        elif sense == GREATER:
            scipy_args["A_ub"].append(-row)
            scipy_args["b_ub"].append(-rhs)
        else:
            scipy_args["A_eq"].append(row)
            scipy_args["b_eq"].append(rhs)
    return model, c, lo, hi, scipy_args


class TestLpExamples:
    def test_single_var_geq(self):
        m = LinearModel()
        x = m.add_variable("x", 0, 2, obj=1.0)
        m.add_constraint([(x, 1.0)], GREATER, 1.0)
        s = solve_lp(m)
        assert s.optimal and abs(s.x[0] - 1) < 1e-9
        assert abs(s.objective - 1) < 1e-9
        assert abs(s.duals[0] - 1) < 1e-9

    def test_two_var_one_pivot(self):
        m = LinearModel()
        a = m.add_variable("a", 0, 10, obj=2.0)
        b = m.add_variable("b", 0, 10, obj=3.0)
        m.add_constraint([(a, 1.0), (b, 1.0)], GREATER, 1.0)
        s = solve_lp(m)
        assert abs(s.objective - 2) < 1e-9
        assert abs(s.x[0] - 1) < 1e-9 and abs(s.x[1]) < 1e-9
        assert abs(s.duals[0] - 2) < 1e-9

    def test_empty_feasible_box(self):
        m = LinearModel()
        m.add_variable("x", 0, 5, obj=0.0)
        s = solve_lp(m)
        assert s.optimal and s.objective == 0 and s.duals.size == 0

    def test_infeasible(self):
        m = LinearModel()
        x = m.add_variable("x", 0, 1, obj=1.0)
        m.add_constraint([(x, 1.0)], GREATER, 2.0)
        assert solve_lp(m).status == "infeasible"

    def test_dual_signs(self):
        m = LinearModel()
        x = m.add_variable("x", 0, 5, obj=1.0)
        y = m.add_variable("y", 0, 5, obj=1.0)
        m.add_constraint([(x, 1.0)], GREATER, 1.0)
        m.add_constraint([(y, 1.0)], LESS, 4.0)
        s = solve_lp(m)
        assert s.duals[0] >= -1e-9
        assert s.duals[1] <= 1e-9


class TestLpRandomized:
    def test_matches_scipy_and_strong_duality(self):
        rng = np.random.default_rng(2024)
        checked = 0
        for _ in range(250):
            model, c, lo, hi, args = random_lp(rng)
            res = linprog(
                c,
                A_ub=np.array(args["A_ub"]) if args["A_ub"] else None,
                b_ub=args["b_ub"] or None,
                A_eq=np.array(args["A_eq"]) if args["A_eq"] else None,
                b_eq=args["b_eq"] or None,
                bounds=list(zip(lo, hi)),
                method="highs",
            )
            mine = solve_lp(model)
            if res.status == 2:
                assert mine.status == "infeasible"
                continue
            assert res.status == 0
            assert mine.optimal
            assert abs(mine.objective - res.fun) <= 1e-6 * max(1.0, abs(res.fun))
            # strong duality with bound terms
            rhs = np.array([con.rhs for con in model.constraints])
            dual_obj = float(mine.duals @ rhs) if rhs.size else 0.0
            bound_part = sum(
                mine.reduced_costs[j] * (lo[j] if mine.reduced_costs[j] > 0 else hi[j])
                for j in range(len(lo))
            )
            assert abs(mine.objective - (dual_obj + bound_part)) < 1e-5
            # complementary slackness: y_i != 0 only on binding rows
            for i, con in enumerate(model.constraints):
                act = sum(coef * mine.x[j] for j, coef in con.coeffs)
                if abs(mine.duals[i]) > 1e-6 and con.sense != EQUAL:
                    assert abs(act - con.rhs) < 1e-6
            checked += 1
        assert checked > 60

    def test_determinism(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            model, *_ = random_lp(rng)
            s1 = solve_lp(model)
            s2 = solve_lp(model)
            assert s1.status == s2.status
            assert s1.iterations == s2.iterations
            if s1.optimal:
                assert np.array_equal(s1.x, s2.x)
                assert np.array_equal(s1.duals, s2.duals)


class TestAntiCycling:
    def test_beale(self):
        m = LinearModel()
        x4 = m.add_variable("x4", 0, 1e6, obj=-0.75)
        x5 = m.add_variable("x5", 0, 1e6, obj=150.0)
        x6 = m.add_variable("x6", 0, 1e6, obj=-0.02)
        x7 = m.add_variable("x7", 0, 1e6, obj=6.0)
        m.add_constraint([(x4, 0.25), (x5, -60.0), (x6, -0.04), (x7, 9.0)], LESS, 0.0)
        m.add_constraint([(x4, 0.5), (x5, -90.0), (x6, -0.02), (x7, 3.0)], LESS, 0.0)
        m.add_constraint([(x6, 1.0)], LESS, 1.0)
        s = solve_lp(m)
        assert s.optimal
        assert abs(s.objective + 0.05) < 1e-9

    def test_marshall_suurballe(self):
        m = LinearModel()
        v = [
            m.add_variable(f"z{j}", 0, 1e6, obj=o)
            for j, o in enumerate([-2.3, -2.15, 13.55, 0.4])
        ]
        m.add_constraint([(v[0], 0.4), (v[1], 0.2), (v[2], -1.4), (v[3], -0.2)], LESS, 0.0)
        m.add_constraint([(v[0], -7.8), (v[1], -1.4), (v[2], 7.8), (v[3], 0.4)], LESS, 0.0)
        s = solve_lp(m)
        assert s.status == "optimal"  # terminates, no cycling


class TestMip:
    def test_knapsack_recast(self):
        m = LinearModel()
        v = [
            m.add_variable(f"x{i}", 0, 1, is_integer=True, obj=-c)
            for i, c in enumerate((6.0, 10.0, 12.0))
        ]
        m.add_constraint([(v[0], 1.0), (v[1], 2.0), (v[2], 3.0)], LESS, 5.0)
        r = solve_mip(m)
        assert r.status == "optimal"
        assert abs(r.upper_bound + 22) < 1e-9
        assert r.x[1] > 0.5 and r.x[2] > 0.5 and r.x[0] < 0.5

    def test_continuous_equals_lp(self):
        m = LinearModel()
        a = m.add_variable("a", 0, 10, obj=2.0)
        b = m.add_variable("b", 0, 10, obj=3.0)
        m.add_constraint([(a, 1.0), (b, 1.0)], GREATER, 1.0)
        r = solve_mip(m)
        s = solve_lp(m)
        assert abs(r.upper_bound - s.objective) < 1e-9
        assert r.nodes == 1

    def test_free_binary_costs_half(self):
        m = LinearModel()
        m.add_variable("x", 0, 1, is_integer=True, obj=0.5)
        r = solve_mip(m)
        assert r.upper_bound == 0 and r.x[0] < 0.5

    def test_versus_bruteforce(self):
        rng = np.random.default_rng(99)
        for _ in range(60):
            n = int(rng.integers(2, 10))
            mrows = int(rng.integers(1, 6))
            c = rng.normal(size=n).round(2)
            model = LinearModel()
            for j in range(n):
                model.add_variable(f"x{j}", 0, 1, is_integer=True, obj=c[j])
            rows = []
            for _ in range(mrows):
                row = np.where(rng.random(n) < 0.7, rng.integers(-3, 4, size=n), 0).astype(float)
                sense = LESS if rng.random() < 0.5 else GREATER
                rhs = float(rng.integers(-2, 5))
                model.add_constraint(
                    [(j, row[j]) for j in range(n) if row[j] != 0], sense, rhs
                )
                rows.append((row, sense, rhs))
            best = None
            for bits in itertools.product((0.0, 1.0), repeat=n):
                x = np.array(bits)
                ok = all(
                    (row @ x <= rhs + 1e-9) if s == LESS else (row @ x >= rhs - 1e-9)
                    for row, s, rhs in rows
                )
                if ok:
                    val = float(c @ x)
                    if best is None or val < best:
                        best = val
            r = solve_mip(model)
            if best is None:
                assert r.status == "infeasible"
            else:
                assert r.status == "optimal"
                assert abs(r.upper_bound - best) < 1e-6

    def test_bounds_and_gap(self):
        m = LinearModel()
        v = [m.add_variable(f"x{i}", 0, 1, is_integer=True, obj=-1.0) for i in range(6)]
        m.add_constraint([(j, 1.0) for j in v], LESS, 2.5)
        r = solve_mip(m)
        assert r.status == "optimal"
        assert r.lower_bound <= r.upper_bound + 1e-6
        assert r.gap_pct == pytest.approx(0.0, abs=1e-6)

    def test_node_limit_returns_incumbent_state(self):
        m = LinearModel()
        v = [m.add_variable(f"x{i}", 0, 1, is_integer=True, obj=-(i + 1) * 0.7) for i in range(12)]
        m.add_constraint([(j, float(i % 3 + 1)) for i, j in enumerate(v)], LESS, 4.0)
        r = solve_mip(m, MipLimits(node_limit=2))
        assert r.status in ("node-limit", "no-solution", "optimal")
        assert r.nodes <= 3

    def test_initial_incumbent_respected(self):
        m = LinearModel()
        x = m.add_variable("x", 0, 1, is_integer=True, obj=1.0)
        inc = (np.array([1.0]), 1.0)
        r = solve_mip(m, initial_incumbent=inc)
        assert r.status == "optimal"
        assert r.upper_bound == 0  # search still finds the better solution


class TestLpFormat:
    def test_export_contains_sections(self):
        m = LinearModel()
        x = m.add_variable("x", 0, 2, is_integer=True, obj=1.5)
        y = m.add_variable("y", -1, 1, obj=-1.0)
        m.add_constraint([(x, 1.0), (y, -2.0)], GREATER, 0.5, name="r1")
        text = to_lp_string(m)
        assert "Minimize" in text and "Subject To" in text
        assert "r1:" in text and "Generals" in text and "Bounds" in text
