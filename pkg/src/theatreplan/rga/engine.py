"""Two-phase permutation GA with bandit-selected operators.

Phase 1 evolves (mandatory list, elective list) pairs; phase 2 merges
them into single permutations and keeps evolving.  Each phase ends
with an enhancement pass that re-decodes every individual with one
room fewer on each day in turn, keeping improvements.  Every new best
solution (and every enhancement improvement) is offered to the column
sink for the column-generation master.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from ..core import Instance, Schedule
from ..errors import ValidationError
from ..heuristics import decode_order, sorted_initial_lists
from .bandit import (
    OUTCOME_FEASIBLE,
    OUTCOME_IMPROVED,
    OUTCOME_INFEASIBLE,
    BanditState,
    ucb_select,
    ucb_update,
)
from .operators import crossover, mutate


@dataclass
class RgaParams:
    population: int = 254
    crossover_rate: float = 0.64
    mutation_rate: float = 0.07
    generations: int = 185
    selection: str = "tournament"  # or "fps"
    l_reward: float = 1.0
    f_reward: float = 0.25
    r_penalty: float = 0.1
    reset_threshold: float = 0.5
    reset_min_samples: int = 5
    time_limit: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.crossover_rate <= 1 and 0 <= self.mutation_rate <= 1):
            raise ValidationError("rates must lie in [0, 1]")
        if self.l_reward < 0 or self.f_reward < 0 or self.r_penalty < 0:
            raise ValidationError("rewards and penalty must be nonnegative")
        if self.population < 1 or self.generations < 0:
            raise ValidationError("population >= 1 and generations >= 0 required")
        if self.selection not in ("tournament", "fps"):
            raise ValidationError("selection must be tournament or fps")


@dataclass
class Chromosome:
    phase: int
    mandatory_order: tuple[int, ...] = ()
    elective_order: tuple[int, ...] = ()
    merged_order: tuple[int, ...] = ()
    room_caps: Optional[dict[int, int]] = None
    fitness: Optional[Fraction] = None

    @property
    def order(self) -> tuple[int, ...]:
        if self.phase == 1:
            return self.mandatory_order + self.elective_order
        return self.merged_order

    def key(self):
        caps = tuple(sorted(self.room_caps.items())) if self.room_caps else None
        return (self.order, caps)


@dataclass
class RgaStats:
    generation_records: list[dict] = field(default_factory=list)
    operator_records: list[dict] = field(default_factory=list)
    selection_trace: list[tuple[str, str]] = field(default_factory=list)
    evaluations: int = 0
    columns_emitted: int = 0
    nmcb: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_jsonl(self) -> str:
        lines = [json.dumps({"kind": "generation", **r}) for r in self.generation_records]
        lines += [json.dumps({"kind": "operator", **r}) for r in self.operator_records]
        if self.nmcb:
            lines.append(json.dumps({"kind": "nmcb", **self.nmcb}))
        return "\n".join(lines) + "\n" if lines else ""


@dataclass
class RgaResult:
    status: str  # ok | failed
    best_schedule: Optional[Schedule]
    best_fitness: Optional[Fraction]
    stats: RgaStats
    bandit: BanditState
    diagnostics: str = ""


class _Run:
    def __init__(
        self,
        instance: Instance,
        params: RgaParams,
        column_sink: Optional[Callable[[Schedule], None]],
    ):
        self.instance = instance
        self.params = params
        self.rng = np.random.default_rng(params.seed)
        self.bandit = BanditState()
        self.registry: set = set()
        self.stats = RgaStats()
        self.sink = column_sink
        self.best_fitness: Optional[Fraction] = None
        self.best_schedule: Optional[Schedule] = None
        self.t0 = time.monotonic()

    # -- plumbing ---------------------------------------------------------

    def out_of_time(self) -> bool:
        return (
            self.params.time_limit is not None
            and time.monotonic() - self.t0 > self.params.time_limit
        )

    def decode(self, chrom: Chromosome):
        self.stats.evaluations += 1
        return decode_order(list(chrom.order), self.instance, chrom.room_caps)

    def update_best(self, schedule: Schedule) -> bool:
        fit = schedule.cost_breakdown.total
        if self.best_fitness is None or fit < self.best_fitness:
            self.best_fitness = fit
            self.best_schedule = schedule
            self.emit(schedule)
            return True
        return False

    def emit(self, schedule: Schedule) -> None:
        if self.sink is not None:
            self.sink(schedule)
            self.stats.columns_emitted += 1

    def pick_operator(self, category: str) -> str:
        op = ucb_select(self.bandit, category)
        self.stats.selection_trace.append((category, op))
        return op

    def reward(self, op: str, outcome: str) -> None:
        p = self.params
        ucb_update(
            self.bandit,
            op,
            outcome,
            l_reward=p.l_reward,
            f_reward=p.f_reward,
            r_penalty=p.r_penalty,
            reset_threshold=p.reset_threshold,
            reset_min_samples=p.reset_min_samples,
        )

    def select_parent(self, population: list[Chromosome]) -> Chromosome:
        n = len(population)
        if self.params.selection == "tournament":
            i = int(self.rng.integers(0, n))
            j = int(self.rng.integers(0, n))
            a, b = population[i], population[j]
            if a.fitness < b.fitness:
                return a
            if b.fitness < a.fitness:
                return b
            return population[min(i, j)]
        # fitness-proportional selection on a minimization objective:
        # weight by distance to the worst, with a floor so everyone
        # keeps a chance
        fits = np.array([float(c.fitness) for c in population])
        worst = fits.max()
        span = worst - fits.min()
        weights = (worst - fits) + (span / 100.0 if span > 0 else 1.0)
        weights = weights / weights.sum()
        idx = int(self.rng.choice(n, p=weights))
        return population[idx]

    # -- evaluation of one offspring ---------------------------------------

    def try_add(
        self,
        chrom: Chromosome,
        population: list[Chromosome],
        ops_to_credit: Sequence[str],
    ) -> None:
        key = chrom.key()
        if key in self.registry:
            return
        self.registry.add(key)
        result = self.decode(chrom)
        if not result.ok:
            for op in ops_to_credit:
                self.reward(op, OUTCOME_INFEASIBLE)
            return
        chrom.fitness = result.schedule.cost_breakdown.total
        improved = self.update_best(result.schedule)
        outcome = OUTCOME_IMPROVED if improved else OUTCOME_FEASIBLE
        for op in ops_to_credit:
            self.reward(op, outcome)
        population.append(chrom)

    # -- phases -------------------------------------------------------------

    def init_phase1(self) -> list[Chromosome]:
        population: list[Chromosome] = []
        mand, elec = sorted_initial_lists(self.instance, self.rng)
        seeds = [(tuple(mand), tuple(elec))]
        attempts = 0
        max_attempts = max(20 * self.params.population, 200)
        while len(population) < self.params.population and attempts < max_attempts:
            if seeds:
                m, e = seeds.pop()
            else:
                m = tuple(int(v) for v in self.rng.permutation(list(mand))) if mand else ()
                e = tuple(int(v) for v in self.rng.permutation(list(elec))) if elec else ()
            attempts += 1
            chrom = Chromosome(phase=1, mandatory_order=m, elective_order=e)
            key = chrom.key()
            if key in self.registry:
                continue
            self.registry.add(key)
            result = self.decode(chrom)
            if not result.ok:
                continue
            chrom.fitness = result.schedule.cost_breakdown.total
            self.update_best(result.schedule)
            population.append(chrom)
            if self.out_of_time():
                break
        return population

    def evolve(self, population: list[Chromosome], phase: int) -> list[Chromosome]:
        p = self.params
        n_pairs = int(round(p.crossover_rate * p.population)) // 2
        n_mut = int(round(p.mutation_rate * p.population))
        for gen in range(1, p.generations + 1):
            if self.out_of_time() or not population:
                break
            for _ in range(n_pairs):
                pa = self.select_parent(population)
                pb = self.select_parent(population)
                cx = self.pick_operator("crossover")
                children = self._crossover_pair(pa, pb, cx, phase)
                for child in children:
                    credit = [cx]
                    if self.rng.random() < p.mutation_rate:
                        mu = self.pick_operator("mutation")
                        self._mutate_inplace(child, mu, phase)
                        credit.append(mu)
                    self.try_add(child, population, credit)
            for _ in range(n_mut):
                cand = self.select_parent(population)
                mu = self.pick_operator("mutation")
                mutant = self._clone(cand, phase)
                self._mutate_inplace(mutant, mu, phase)
                self.try_add(mutant, population, [mu])
            population.sort(key=lambda c: c.fitness)
            population[:] = population[: p.population]
            best = population[0].fitness
            mean = sum(float(c.fitness) for c in population) / len(population)
            self.stats.generation_records.append(
                {
                    "phase": phase,
                    "generation": gen,
                    "best": float(best),
                    "mean": mean,
                    "population": len(population),
                }
            )
            for op in self.bandit.tr:
                self.stats.operator_records.append(
                    {
                        "phase": phase,
                        "generation": gen,
                        "op": op,
                        "tr": self.bandit.tr[op],
                        "tos": self.bandit.tos[op],
                    }
                )
        return population

    def _clone(self, c: Chromosome, phase: int) -> Chromosome:
        return Chromosome(
            phase=phase,
            mandatory_order=c.mandatory_order,
            elective_order=c.elective_order,
            merged_order=c.merged_order,
            room_caps=dict(c.room_caps) if c.room_caps else None,
        )

    def _crossover_pair(
        self, pa: Chromosome, pb: Chromosome, kind: str, phase: int
    ) -> list[Chromosome]:
        if phase == 1:
            m1, m2 = crossover(kind, pa.mandatory_order, pb.mandatory_order, self.rng)
            e1, e2 = crossover(kind, pa.elective_order, pb.elective_order, self.rng)
            return [
                Chromosome(1, tuple(m1), tuple(e1)),
                Chromosome(1, tuple(m2), tuple(e2)),
            ]
        g1, g2 = crossover(kind, pa.merged_order, pb.merged_order, self.rng)
        return [
            Chromosome(2, merged_order=tuple(g1)),
            Chromosome(2, merged_order=tuple(g2)),
        ]

    def _mutate_inplace(self, chrom: Chromosome, kind: str, phase: int) -> None:
        if phase == 1:
            chrom.mandatory_order = tuple(mutate(kind, chrom.mandatory_order, self.rng))
            chrom.elective_order = tuple(mutate(kind, chrom.elective_order, self.rng))
        else:
            chrom.merged_order = tuple(mutate(kind, chrom.merged_order, self.rng))

    def enhance(self, population: list[Chromosome], phase: int) -> None:
        """Probe y_d - 1 for every day of every individual, keep improvements."""
        for chrom in population:
            if self.out_of_time():
                return
            result = decode_order(list(chrom.order), self.instance, chrom.room_caps)
            if not result.ok:
                continue
            current = result.schedule
            for d in range(1, self.instance.num_days + 1):
                y = current.rooms_open.get(d, 0)
                if y <= 0:
                    continue
                caps = {
                    day: current.rooms_open.get(day, 0)
                    for day in range(1, self.instance.num_days + 1)
                }
                caps[d] = y - 1
                probe = Chromosome(
                    phase=phase,
                    mandatory_order=chrom.mandatory_order,
                    elective_order=chrom.elective_order,
                    merged_order=chrom.merged_order,
                    room_caps=caps,
                )
                key = probe.key()
                if key in self.registry:
                    continue
                self.registry.add(key)
                trial = self.decode(probe)
                if not trial.ok:
                    continue
                fit = trial.schedule.cost_breakdown.total
                if fit < chrom.fitness:
                    chrom.room_caps = caps
                    chrom.fitness = fit
                    current = trial.schedule
                    self.emit(trial.schedule)
                    if self.best_fitness is None or fit < self.best_fitness:
                        self.best_fitness = fit
                        self.best_schedule = trial.schedule

    def merge_to_phase2(self, population: list[Chromosome]) -> list[Chromosome]:
        out = []
        for c in population:
            out.append(
                Chromosome(
                    phase=2,
                    merged_order=c.mandatory_order + c.elective_order,
                    room_caps=dict(c.room_caps) if c.room_caps else None,
                    fitness=c.fitness,
                )
            )
        return out


def run_rga(
    instance: Instance,
    params: Optional[RgaParams] = None,
    column_sink: Optional[Callable[[Schedule], None]] = None,
) -> RgaResult:
    """Run both GA phases; returns the best schedule and run statistics."""
    params = params or RgaParams()
    run = _Run(instance, params, column_sink)

    population = run.init_phase1()
    if not population:
        return RgaResult(
            "failed",
            None,
            None,
            run.stats,
            run.bandit,
            diagnostics=(
                "no feasible decode found while seeding the population; the "
                "mandatory load likely exceeds room or surgeon capacity"
            ),
        )
    population.sort(key=lambda c: c.fitness)
    population = run.evolve(population, phase=1)
    run.enhance(population, phase=1)

    population.sort(key=lambda c: c.fitness)
    phase2 = run.merge_to_phase2(population)
    phase2 = run.evolve(phase2, phase=2)
    run.enhance(phase2, phase=2)

    from .bandit import nmcb_values

    run.stats.nmcb = {
        "crossover": nmcb_values(run.bandit, "crossover"),
        "mutation": nmcb_values(run.bandit, "mutation"),
    }
    return RgaResult("ok", run.best_schedule, run.best_fitness, run.stats, run.bandit)
