"""
Independent checks for the optimiser and the analytic rate model.

``naive_grid_optimum`` scans every coarse grid point without pruning.
``mc_rate`` samples the pair-consumption process behind the rate formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import ChainDecision, LinkConfig, QosRequirement, evaluate
from .model import NoiseParams, distill_n_rounds, swap_chain_fidelity
from .search import NoFeasibleSolution, Pins, SearchBounds, Solution, select_best

__all__ = ["GridTooLarge", "McRateEstimate", "analytic_rate", "mc_rate", "naive_grid_optimum"]

MAX_GRID_POINTS = 10**7


class GridTooLarge(ValueError):
    pass


def naive_grid_optimum(link: LinkConfig, noise: NoiseParams, qos: QosRequirement, bounds: SearchBounds,
                       pins: Pins | None = None) -> Solution | NoFeasibleSolution:
    """Evaluate every point of the coarse grid and keep the best feasible one."""
    pins = pins or Pins()
    b = pins.apply(bounds)
    ns, nls, nes = pins.n_range(b), pins.nl_range(b), pins.ne_range(b)
    js = range(0, b.fine_count, b.coarse_ratio)
    size = len(ns) * len(nls) * len(nes) * len(js)
    if size > MAX_GRID_POINTS:
        raise GridTooLarge(f"{size} grid points exceeds the {MAX_GRID_POINTS} limit")
    results = [
        evaluate(ChainDecision(n, b.d_at(j), nl, ne), link, noise, qos)
        for n in ns for nl in nls for ne in nes for j in js
    ]
    best = select_best(results)
    if best is None:
        return NoFeasibleSolution("naive", size)
    return Solution(best.decision, best, "naive", size)


@dataclass(frozen=True)
class McRateEstimate:
    mean_rate: float
    std_error: float
    trials: int
    seed: int
    batch_size: int


def _pair_up(counts: np.ndarray, p_success: float, rng: np.random.Generator) -> np.ndarray:
    # states left unpaired in one batch wait in memory for the next batch
    cum = np.cumsum(counts)
    pairs = np.diff(cum // 2, prepend=0)
    return rng.binomial(pairs, p_success)


def mc_rate(decision: ChainDecision, link: LinkConfig, noise: NoiseParams, trials: int = 10_000,
            seed: int = 0, batch_size: int | None = None) -> McRateEstimate:
    """
    Monte-Carlo estimate of the end-to-end generation rate.

    Each trial is a batch of ``batch_size`` raw attempts on a representative
    link (links are identically distributed and swaps are deterministic, so
    one link's surviving states map one-to-one onto end-to-end pairs). Raw
    pairs survive the fibre with probability ``exp(-d / l0)``; every
    distillation round pairs up available states and keeps each pair with
    that round's success probability. Batches run back to back with leftover
    unpaired states carried forward. The estimate is ``r0 * outputs / batch_size``
    averaged over batches.
    """
    if trials < 1000:
        raise ValueError("mc_rate needs trials >= 1000")
    k = decision.distill_rounds
    m = batch_size if batch_size is not None else 2 ** (k + 4)
    if m < 1:
        raise ValueError("batch_size must be >= 1")

    link_trace = distill_n_rounds(decision.n_link_distill, link.f0, noise)
    f_e1 = swap_chain_fidelity(link_trace.final, decision.n_links, noise)
    e2e_trace = distill_n_rounds(decision.n_e2e_distill, f_e1, noise)
    probs = link_trace.success_probs + e2e_trace.success_probs

    rng = np.random.default_rng(seed)
    counts = rng.binomial(m, link.transmission(decision.d), size=trials)
    for p in probs:
        counts = _pair_up(counts, p, rng)
    rates = link.r0 * counts / m
    std_error = float(rates.std(ddof=1) / np.sqrt(trials))
    return McRateEstimate(float(rates.mean()), std_error, trials, seed, m)


def analytic_rate(decision: ChainDecision, link: LinkConfig, noise: NoiseParams) -> float:
    """End-to-end rate from the closed-form model; QoS floors play no role."""
    return evaluate(decision, link, noise, QosRequirement(r_min=1e-300, f_min=0.25)).e2e_rate
