"""
Seeded genetic algorithm over the same decision grid as the exhaustive search.

Genome: (n_links, fine-grid index of d, n_link_distill, n_e2e_distill).
Constraints are handled by feasible-first ranking: every feasible individual
outranks every infeasible one, infeasible individuals are ordered by their
constraint-violation magnitude.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .chain import ChainDecision, EvaluationResult, LinkConfig, QosRequirement, evaluate
from .model import NoiseParams
from .search import NoFeasibleSolution, Pins, SearchBounds, Solution, select_best, tie_key

__all__ = ["GaConfig", "ga_search"]

Genome = tuple[int, int, int, int]


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 64
    generations_max: int = 1000
    crossover_rate: float = 0.9
    mutation_rate: float = 0.15
    tournament_size: int = 3
    seed: int = 0
    stall_generations: int = 100
    d_sigma: float = 0.25  # km
    elite: int = 1

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations_max < 1:
            raise ValueError("generations_max must be >= 1")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.stall_generations < 1:
            raise ValueError("stall_generations must be >= 1")
        if not 0 <= self.elite < self.population_size:
            raise ValueError("elite must be in [0, population_size)")


def rank_key(r: EvaluationResult) -> tuple:
    if r.feasible:
        return (0, -r.objective, tie_key(r))
    return (1, r.violation, tie_key(r))


class _Problem:
    def __init__(self, link, noise, qos, bounds: SearchBounds, pins: Pins):
        self.link, self.noise, self.qos = link, noise, qos
        self.bounds = pins.apply(bounds)
        b = self.bounds
        self.ranges = [
            pins.n_range(b),
            range(0, b.fine_count),
            pins.nl_range(b),
            pins.ne_range(b),
        ]
        self.cache: dict[Genome, EvaluationResult] = {}
        self.calls = 0

    def decision(self, g: Genome) -> ChainDecision:
        return ChainDecision(g[0], self.bounds.d_at(g[1]), g[2], g[3])

    def evaluate_all(self, genomes: list[Genome], pool: ThreadPoolExecutor | None) -> list[EvaluationResult]:
        todo = sorted({g for g in genomes if g not in self.cache})
        fn = lambda g: evaluate(self.decision(g), self.link, self.noise, self.qos)  # noqa: E731
        results = pool.map(fn, todo) if pool else map(fn, todo)
        for g, r in zip(todo, results):
            self.cache[g] = r
        self.calls += len(todo)
        return [self.cache[g] for g in genomes]


def _random_genome(rng: np.random.Generator, ranges) -> Genome:
    return tuple(int(rng.integers(r.start, r.stop)) for r in ranges)


def _mutate(g: Genome, rng: np.random.Generator, p: _Problem, ga: GaConfig) -> Genome:
    out = list(g)
    for i, r in enumerate(p.ranges):
        if len(r) == 1 or rng.random() >= ga.mutation_rate:
            continue
        if i == 1:
            b = p.bounds
            d = b.d_at(out[1]) + rng.normal(0.0, ga.d_sigma)
            out[1] = b.snap(min(max(d, b.d_min), b.d_max))
        else:
            step = int(rng.geometric(0.5)) * (1 if rng.random() < 0.5 else -1)
            out[i] = min(max(out[i] + step, r.start), r.stop - 1)
    return tuple(out)


def _crossover(a: Genome, b: Genome, rng: np.random.Generator) -> tuple[Genome, Genome]:
    mask = rng.random(len(a)) < 0.5
    c1 = tuple(y if m else x for x, y, m in zip(a, b, mask))
    c2 = tuple(x if m else y for x, y, m in zip(a, b, mask))
    return c1, c2


def _tournament(keys: list[tuple], rng: np.random.Generator, size: int) -> int:
    picks = rng.integers(0, len(keys), size=size)
    return min(picks, key=lambda i: keys[i])


def ga_search(link: LinkConfig, noise: NoiseParams, qos: QosRequirement, bounds: SearchBounds,
              ga: GaConfig = GaConfig(), pins: Pins | None = None,
              workers: int = 1) -> Solution | NoFeasibleSolution:
    """
    Evolve decisions with tournament selection, uniform crossover and per-gene
    mutation. Deterministic for a given ``ga.seed``; ``workers`` only spreads
    evaluations over threads and never changes the result.

    The returned ``history`` holds the best feasible objective after each
    generation (None before the first feasible individual appears).
    """
    p = _Problem(link, noise, qos, bounds, pins or Pins())
    rng = np.random.default_rng(ga.seed)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        population = [_random_genome(rng, p.ranges) for _ in range(ga.population_size)]
        best: EvaluationResult | None = None
        history: list[float | None] = []
        stall = 0
        for _gen in range(ga.generations_max):
            results = p.evaluate_all(population, pool)
            candidate = select_best([best, *results] if best else results)
            improved = candidate is not None and (best is None or candidate.objective > best.objective + 1e-12)
            if candidate is not None:
                best = candidate
            history.append(best.objective if best else None)
            stall = 0 if improved or best is None else stall + 1
            if stall >= ga.stall_generations:
                break

            keys = [rank_key(r) for r in results]
            order = sorted(range(len(population)), key=lambda i: keys[i])
            nxt = [population[i] for i in order[:ga.elite]]
            while len(nxt) < ga.population_size:
                a = population[_tournament(keys, rng, ga.tournament_size)]
                b = population[_tournament(keys, rng, ga.tournament_size)]
                if rng.random() < ga.crossover_rate:
                    a, b = _crossover(a, b, rng)
                nxt.append(_mutate(a, rng, p, ga))
                if len(nxt) < ga.population_size:
                    nxt.append(_mutate(b, rng, p, ga))
            population = nxt
    finally:
        if pool:
            pool.shutdown()

    if best is None:
        return NoFeasibleSolution("genetic", p.calls, ga.seed, tuple(history))
    return Solution(best.decision, best, "genetic", p.calls, ga.seed, tuple(history))
