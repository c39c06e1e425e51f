"""Bounded-variable primal simplex with dual extraction.

Two-phase, dense basis inverse with periodic refactorization.
Pricing uses the steepest-improvement (Dantzig) rule and switches to
Bland's rule during degenerate stalls, which keeps the method both
fast in practice and provably finite.  Everything is deterministic:
ties break to the lowest variable index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import TheatrePlanError
from .model import EQUAL, GREATER, LESS, LinearModel, LpSolution

PIVOT_TOL = 1e-9  # pivot eligibility
FEAS_TOL = 1e-7  # feasibility / phase-1 acceptance
RATIO_TIE = 1e-12
REFACTOR_EVERY = 64
STALL_BEFORE_BLAND = 24  # consecutive degenerate pivots before Bland's rule kicks in
DEFAULT_ITERATION_LIMIT = 200_000

_INF = float("inf")


@dataclass
class _Prepared:
    """Model data assembled once and reused across bound changes (B&B)."""

    A: np.ndarray  # m x N, structurals then slacks
    c: np.ndarray  # length N, phase-2 costs
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_struct: int
    row_senses: list[str]


def prepare(model: LinearModel) -> _Prepared:
    m = len(model.constraints)
    n = len(model.variables)
    N = n + m  # one slack per row; '=' slacks are fixed at zero
    A = np.zeros((m, N))
    b = np.empty(m)
    lower = np.empty(N)
    upper = np.empty(N)
    c = np.zeros(N)
    senses = []
    for j, v in enumerate(model.variables):
        lower[j] = v.lower
        upper[j] = v.upper
        c[j] = v.obj
    for i, con in enumerate(model.constraints):
        for idx, coef in con.coeffs:
            A[i, idx] += coef
        b[i] = con.rhs
        s = n + i
        A[i, s] = 1.0
        senses.append(con.sense)
        if con.sense == LESS:
            lower[s], upper[s] = 0.0, _INF
        elif con.sense == GREATER:
            lower[s], upper[s] = -_INF, 0.0
        else:
            lower[s], upper[s] = 0.0, 0.0
    return _Prepared(A, c, b, lower, upper, n, senses)


class _Simplex:
    """One solve over a prepared matrix with (possibly overridden) bounds."""

    def __init__(self, prep: _Prepared, lower: np.ndarray, upper: np.ndarray):
        m, N = prep.A.shape
        self.m, self.N = m, N
        self.b = prep.b
        self.c2 = prep.c
        self.n_struct = prep.n_struct
        self.iterations = 0

        # nonbasic start: finite lower bound when it exists, else upper
        xN = np.where(np.isfinite(lower), lower, upper)
        resid = self.b - prep.A @ xN
        art_sign = np.where(resid >= 0, 1.0, -1.0)

        # full matrix includes one artificial column per row
        self.Afull = np.hstack([prep.A, np.diag(art_sign)])
        self.lower = np.concatenate([lower, np.zeros(m)])
        self.upper = np.concatenate([upper, np.full(m, _INF)])
        self.xval = np.concatenate([xN, np.abs(resid)])
        self.at_upper = np.concatenate([~np.isfinite(lower), np.zeros(m, dtype=bool)])
        self.basis = np.arange(N, N + m)
        self.in_basis = np.zeros(N + m, dtype=bool)
        self.in_basis[N:] = True
        self.Binv = np.diag(art_sign)  # inverse of a signature matrix is itself
        self.xB = np.abs(resid).astype(float)

    def _refactor(self):
        B = self.Afull[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise TheatrePlanError("singular basis during refactorization") from exc
        mask = ~self.in_basis
        rhs = self.b - self.Afull[:, mask] @ self.xval[mask]
        self.xB = self.Binv @ rhs
        self.xval[self.basis] = self.xB

    def _run_phase(self, cost: np.ndarray, iteration_limit: int) -> str:
        Afull = self.Afull
        fixed = self.lower == self.upper
        pivots_since_refactor = 0
        stall = 0
        while True:
            if self.iterations >= iteration_limit:
                return "iteration-limit"
            y = cost[self.basis] @ self.Binv
            d = cost - y @ Afull

            can_enter = ~self.in_basis & ~fixed
            elig_lo = can_enter & ~self.at_upper & (d < -PIVOT_TOL)
            elig_up = can_enter & self.at_upper & (d > PIVOT_TOL)
            if not (elig_lo.any() or elig_up.any()):
                return "optimal"
            if stall >= STALL_BEFORE_BLAND:
                # Bland: lowest eligible index, guarantees no cycling
                entering = int(np.argmax(elig_lo | elig_up))
            else:
                gain = np.where(elig_lo, -d, np.where(elig_up, d, -_INF))
                entering = int(np.argmax(gain))
            direction = -1.0 if self.at_upper[entering] else 1.0

            w = self.Binv @ Afull[:, entering]
            step = direction * w  # xB moves by -step * t

            lowerB = self.lower[self.basis]
            upperB = self.upper[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_lo = np.where(
                    (step > PIVOT_TOL) & np.isfinite(lowerB),
                    (self.xB - lowerB) / step,
                    _INF,
                )
                t_up = np.where(
                    (step < -PIVOT_TOL) & np.isfinite(upperB),
                    (self.xB - upperB) / step,
                    _INF,
                )
            ratios = np.maximum(np.minimum(t_lo, t_up), 0.0)
            best_t = float(ratios.min()) if self.m else _INF

            flip_t = self.upper[entering] - self.lower[entering]
            if np.isfinite(flip_t) and flip_t <= best_t + RATIO_TIE:
                self.iterations += 1
                self.xB -= step * flip_t
                self.xval[self.basis] = self.xB
                self.at_upper[entering] = ~self.at_upper[entering]
                self.xval[entering] = (
                    self.upper[entering] if self.at_upper[entering] else self.lower[entering]
                )
                stall = 0 if flip_t > RATIO_TIE else stall + 1
                continue
            if not np.isfinite(best_t):
                raise TheatrePlanError(
                    "unbounded direction in a bounded model (numerical failure)"
                )

            tie = ratios <= best_t + RATIO_TIE
            # Bland tie-break: smallest variable index among the blocking set
            cands = np.where(tie)[0]
            leave_pos = int(cands[np.argmin(self.basis[cands])])
            leave_to_upper = t_up[leave_pos] <= t_lo[leave_pos]

            t = best_t
            self.iterations += 1
            stall = 0 if t > RATIO_TIE else stall + 1
            self.xB -= step * t
            enter_val = (
                self.lower[entering] + t if direction > 0 else self.upper[entering] - t
            )
            leaving = int(self.basis[leave_pos])
            self.in_basis[leaving] = False
            self.at_upper[leaving] = leave_to_upper
            self.basis[leave_pos] = entering
            self.in_basis[entering] = True
            self.xB[leave_pos] = enter_val
            self.xval[self.basis] = self.xB
            self.xval[leaving] = (
                self.upper[leaving] if leave_to_upper else self.lower[leaving]
            )

            wp = w[leave_pos]
            if abs(wp) < PIVOT_TOL:
                self._refactor()
            else:
                pivot_row = self.Binv[leave_pos, :] / wp
                self.Binv -= np.outer(w, pivot_row)
                self.Binv[leave_pos, :] = pivot_row
                pivots_since_refactor += 1
                if pivots_since_refactor >= REFACTOR_EVERY:
                    self._refactor()
                    pivots_since_refactor = 0

    def solve(self, iteration_limit: int) -> tuple[str, np.ndarray, np.ndarray]:
        phase1_cost = np.zeros(self.N + self.m)
        phase1_cost[self.N :] = 1.0
        status = self._run_phase(phase1_cost, iteration_limit)
        if status != "optimal":
            return status, np.zeros(0), np.zeros(0)
        art = self.basis >= self.N
        infeas = float(self.xB[art].sum()) if art.any() else 0.0
        if infeas > FEAS_TOL:
            return "infeasible", np.zeros(0), np.zeros(0)
        self.upper[self.N :] = 0.0  # pin artificials for phase 2
        cost2 = np.concatenate([self.c2, np.zeros(self.m)])
        status = self._run_phase(cost2, iteration_limit)
        if status != "optimal":
            return status, np.zeros(0), np.zeros(0)
        y = cost2[self.basis] @ self.Binv
        d = cost2 - y @ self.Afull
        return "optimal", y, d


@dataclass
class Basis:
    """Snapshot of an optimal basis, reusable as a dual-simplex warm start.

    binv is optional: when present the warm start skips refactorizing.
    """

    basis: np.ndarray
    at_upper: np.ndarray
    art_sign: np.ndarray
    binv: Optional[np.ndarray] = None

    def without_binv(self) -> "Basis":
        return Basis(self.basis, self.at_upper, self.art_sign, None)


class _DualSimplex:
    """Reoptimize after bound changes starting from a dual-feasible basis.

    Bound tightening (the only change branch and bound makes) keeps the
    parent's optimal basis dual feasible, so a handful of dual pivots
    usually restores primal feasibility.
    """

    def __init__(self, prep: _Prepared, lower, upper, warm: Basis):
        m, N = prep.A.shape
        self.m, self.N = m, N
        self.b = prep.b
        self.cost = np.concatenate([prep.c, np.zeros(m)])
        self.Afull = np.hstack([prep.A, np.diag(warm.art_sign)])
        self.lower = np.concatenate([lower, np.zeros(m)])
        self.upper = np.concatenate([upper, np.zeros(m)])  # artificials stay pinned
        self.basis = warm.basis.copy()
        self.at_upper = warm.at_upper.copy()
        self.in_basis = np.zeros(N + m, dtype=bool)
        self.in_basis[self.basis] = True
        self.iterations = 0

        self.xval = np.where(self.at_upper, self.upper, self.lower)
        # nonbasic variables whose stored side became infinite sit on the
        # other (finite) side; branching never produces this for structurals
        bad = ~self.in_basis & ~np.isfinite(self.xval)
        self.xval[bad] = np.where(
            self.at_upper[bad], self.lower[bad], self.upper[bad]
        )
        self.at_upper[bad] = ~self.at_upper[bad]
        self.Binv = warm.binv.copy() if warm.binv is not None else None

    def _recompute(self):
        mask = ~self.in_basis
        rhs = self.b - self.Afull[:, mask] @ self.xval[mask]
        self.xB = self.Binv @ rhs
        self.xval[self.basis] = self.xB

    def solve(self, iteration_limit: Optional[int] = None) -> str:
        if iteration_limit is None:
            iteration_limit = max(400, 3 * self.m)
        if self.Binv is None:
            try:
                self.Binv = np.linalg.inv(self.Afull[:, self.basis])
            except np.linalg.LinAlgError:
                return "refused"
        self._recompute()
        y = self.cost[self.basis] @ self.Binv
        d = self.cost - y @ self.Afull
        ftol = FEAS_TOL
        fixed = self.lower == self.upper
        best_infeas = _INF
        stall = 0
        while True:
            if self.iterations >= iteration_limit:
                return "refused"  # fall back to a cold solve
            lowerB = self.lower[self.basis]
            upperB = self.upper[self.basis]
            below = self.xB < lowerB - ftol
            above = self.xB > upperB + ftol
            if not (below.any() or above.any()):
                return "optimal"
            viol = np.where(below, lowerB - self.xB, np.where(above, self.xB - upperB, 0.0))
            total_viol = float(viol.sum())
            if total_viol < best_infeas - 1e-10:
                best_infeas = total_viol
                stall = 0
            else:
                stall += 1
            if stall >= STALL_BEFORE_BLAND:
                # dual Bland: lowest basis index among the infeasible rows
                infeas_pos = np.where(viol > 0)[0]
                leave_pos = int(infeas_pos[np.argmin(self.basis[infeas_pos])])
            else:
                leave_pos = int(np.argmax(viol))
            to_lower = bool(below[leave_pos])

            # rho = -sigma * (row p of Binv A) where sigma = +1 when the
            # leaving variable must increase (it sits below its lower bound)
            row = self.Binv[leave_pos, :] @ self.Afull
            rho = -row if to_lower else row

            can = ~self.in_basis & ~fixed
            elig_lo = can & ~self.at_upper & (rho > PIVOT_TOL)
            elig_up = can & self.at_upper & (rho < -PIVOT_TOL)
            elig = elig_lo | elig_up
            if not elig.any():
                return "infeasible"
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(elig, d / rho, _INF)
            ratio = np.where(elig, np.maximum(ratio, 0.0), _INF)
            best = float(ratio.min())
            cands = np.where(ratio <= best + RATIO_TIE)[0]
            if stall >= STALL_BEFORE_BLAND:
                entering = int(cands[0])  # Bland: lowest index
            else:
                # among tied ratios take the largest pivot magnitude;
                # degenerate duals otherwise wander on tiny pivots
                entering = int(cands[np.argmax(np.abs(rho[cands]))])

            w = self.Binv @ self.Afull[:, entering]
            wp = w[leave_pos]
            if abs(wp) < PIVOT_TOL:
                return "refused"
            leaving = int(self.basis[leave_pos])
            bound_leave = self.lower[leaving] if to_lower else self.upper[leaving]
            # primal step: entering moves so the leaving basic lands on its bound
            delta = (self.xB[leave_pos] - bound_leave) / wp
            span = self.upper[entering] - self.lower[entering]
            if np.isfinite(span) and abs(delta) > span + RATIO_TIE:
                # the entering variable hits its own opposite bound first:
                # bound flip, no basis change, reduced costs untouched
                step = span if not self.at_upper[entering] else -span
                self.xB -= step * w
                self.at_upper[entering] = not self.at_upper[entering]
                self.xval[entering] = (
                    self.upper[entering]
                    if self.at_upper[entering]
                    else self.lower[entering]
                )
                self.xval[self.basis] = self.xB
                self.iterations += 1
                continue
            enter_new = self.xval[entering] + delta
            self.xB -= delta * w
            self.xB[leave_pos] = enter_new
            # dual step: theta keeps reduced costs dual-feasible
            theta = d[entering] / row[entering]
            d = d - theta * row
            d[leaving] = -theta

            self.in_basis[leaving] = False
            self.at_upper[leaving] = not to_lower
            self.xval[leaving] = bound_leave
            self.basis[leave_pos] = entering
            self.in_basis[entering] = True
            self.xval[self.basis] = self.xB
            d[entering] = 0.0

            pivot_row = self.Binv[leave_pos, :] / wp
            self.Binv -= np.outer(w, pivot_row)
            self.Binv[leave_pos, :] = pivot_row
            self.iterations += 1
            if self.iterations % REFACTOR_EVERY == 0:
                self._recompute()
                y = self.cost[self.basis] @ self.Binv
                d = self.cost - y @ self.Afull

    def result(self, n_struct: int, c: np.ndarray) -> tuple[LpSolution, Basis]:
        y = self.cost[self.basis] @ self.Binv
        d = self.cost - y @ self.Afull
        x = self.xval[:n_struct].copy()
        obj = float(c[:n_struct] @ x)
        sol = LpSolution("optimal", x, obj, y.copy(), d[:n_struct].copy(), self.iterations)
        base = Basis(
            self.basis.copy(),
            self.at_upper.copy(),
            np.sign(np.diag(self.Afull[:, self.N :])) if self.m else np.zeros(0),
            self.Binv.copy(),
        )
        return sol, base


def solve_lp_warm(
    prep: _Prepared,
    bounds_override: Optional[dict[int, tuple[float, float]]] = None,
    warm: Optional[Basis] = None,
    iteration_limit: int = DEFAULT_ITERATION_LIMIT,
    fallback: Optional[Basis] = None,
) -> tuple[LpSolution, Optional[Basis]]:
    """Solve with an optional dual-simplex warm start; returns the basis.

    `fallback` is a second dual-feasible basis (typically the root's)
    tried when the first warm start stalls; a cold two-phase solve is
    the last resort.
    """
    lower = prep.lower.copy()
    upper = prep.upper.copy()
    if bounds_override:
        for idx, (lo, hi) in bounds_override.items():
            lower[idx], upper[idx] = lo, hi
            if lo > hi + 1e-12:
                return (
                    LpSolution(
                        "infeasible", np.zeros(prep.n_struct), _INF,
                        np.zeros(prep.A.shape[0]), np.zeros(prep.n_struct), 0,
                    ),
                    None,
                )
    tries = [w for w in (warm, fallback) if w is not None]
    for attempt, basis0 in enumerate(tries):
        dual = _DualSimplex(prep, lower, upper, basis0)
        status = dual.solve(None if attempt == 0 else max(800, 6 * prep.A.shape[0]))
        if status == "optimal":
            sol, base = dual.result(prep.n_struct, prep.c)
            # guard against drift: accept only primal-feasible results
            if _primal_feasible(prep, sol.x, lower, upper):
                return sol, base
        elif status == "infeasible":
            return (
                LpSolution(
                    "infeasible", np.zeros(prep.n_struct), _INF,
                    np.zeros(prep.A.shape[0]), np.zeros(prep.n_struct), dual.iterations,
                ),
                None,
            )
        # "refused": try the next start, then a cold solve

    sx = _Simplex(prep, lower, upper)
    status, y, d = sx.solve(iteration_limit)
    n = prep.n_struct
    if status != "optimal":
        return (
            LpSolution(
                status, np.zeros(n), _INF, np.zeros(prep.A.shape[0]), np.zeros(n),
                sx.iterations,
            ),
            None,
        )
    x = sx.xval[:n].copy()
    obj = float(prep.c[:n] @ x)
    base = Basis(
        sx.basis.copy(), sx.at_upper.copy(), np.diag(sx.Afull[:, sx.N:]).copy(),
        sx.Binv.copy(),
    )
    return LpSolution("optimal", x, obj, y.copy(), d[:n].copy(), sx.iterations), base


def _primal_feasible(prep: _Prepared, x: np.ndarray, lower, upper) -> bool:
    n = prep.n_struct
    if (x < lower[:n] - 1e-6).any() or (x > upper[:n] + 1e-6).any():
        return False
    act = prep.A[:, :n] @ x
    for i, sense in enumerate(prep.row_senses):
        if sense == LESS and act[i] > prep.b[i] + 1e-6:
            return False
        if sense == GREATER and act[i] < prep.b[i] - 1e-6:
            return False
        if sense == EQUAL and abs(act[i] - prep.b[i]) > 1e-6:
            return False
    return True


def solve_lp(
    model: LinearModel,
    bounds_override: Optional[dict[int, tuple[float, float]]] = None,
    prepared: Optional[_Prepared] = None,
    iteration_limit: int = DEFAULT_ITERATION_LIMIT,
) -> LpSolution:
    """Solve the LP relaxation to an optimal basic solution with duals.

    bounds_override maps variable index -> (lower, upper); the
    branch-and-bound driver uses it so the assembled matrix is shared
    between nodes.
    """
    prep = prepared if prepared is not None else prepare(model)
    sol, _ = solve_lp_warm(prep, bounds_override, None, iteration_limit)
    return sol
