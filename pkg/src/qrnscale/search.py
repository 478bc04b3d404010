"""
Maximise chain length ``n_links * d`` subject to end-to-end rate and fidelity floors.

The separation ``d`` is searched on a fine grid ``d_min + j * d_refine_step``;
the coarse grid is every ``m``-th fine point, ``m = d_coarse_step / d_refine_step``.
Both the exhaustive search and the genetic algorithm work on this same grid.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .chain import ChainDecision, EvaluationResult, LinkConfig, QosRequirement, evaluate
from .model import DistillationInfeasible, FixedPointNotConverged, NoiseParams, distill_fixed_point, \
    distill_n_rounds, swap_chain_fidelity

__all__ = [
    "NoFeasibleSolution",
    "Pins",
    "SearchBounds",
    "Solution",
    "derive_bounds",
    "exhaustive_search",
    "select_best",
]

OBJECTIVE_TIE_TOL = 1e-9
DEFAULT_N_HARD_CAP = 500
DEFAULT_COARSE_STEP = 0.05
DEFAULT_REFINE_STEP = 0.001


class QosUnachievable(ValueError):
    pass


@dataclass(frozen=True)
class SearchBounds:
    n_max: int
    d_min: float
    d_max: float
    d_coarse_step: float = DEFAULT_COARSE_STEP
    d_refine_step: float = DEFAULT_REFINE_STEP
    n_link_distill_max: int = 0
    n_e2e_distill_max: int = 0

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if not (0 <= self.d_min <= self.d_max) or not math.isfinite(self.d_max):
            raise ValueError(f"need 0 <= d_min <= d_max < inf, got [{self.d_min}, {self.d_max}]")
        if not (0 < self.d_refine_step <= self.d_coarse_step):
            raise ValueError("need 0 < d_refine_step <= d_coarse_step")
        if self.n_link_distill_max < 0 or self.n_e2e_distill_max < 0:
            raise ValueError("distillation caps must be >= 0")
        ratio = self.d_coarse_step / self.d_refine_step
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ValueError("d_coarse_step must be an integer multiple of d_refine_step")

    @property
    def coarse_ratio(self) -> int:
        return int(round(self.d_coarse_step / self.d_refine_step))

    @property
    def fine_count(self) -> int:
        """Number of fine grid points in ``[d_min, d_max]``."""
        return int(math.floor((self.d_max - self.d_min) / self.d_refine_step + 1e-9)) + 1

    @property
    def coarse_count(self) -> int:
        return (self.fine_count - 1) // self.coarse_ratio + 1

    def d_at(self, j: int) -> float:
        """Separation at fine grid index ``j``."""
        return round(self.d_min + j * self.d_refine_step, 12)

    def snap(self, d: float) -> int:
        """Fine grid index nearest to ``d``, clipped to the grid."""
        j = int(round((d - self.d_min) / self.d_refine_step))
        return min(max(j, 0), self.fine_count - 1)

    def replace(self, **changes) -> "SearchBounds":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class Pins:
    """Optional fixed values for decision variables."""

    n_links: int | None = None
    d: float | None = None
    n_link_distill: int | None = None
    n_e2e_distill: int | None = None

    @classmethod
    def from_mapping(cls, m: dict | None) -> "Pins":
        if not m:
            return cls()
        unknown = set(m) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown pin(s): {sorted(unknown)}")
        return cls(**m)

    def apply(self, bounds: SearchBounds) -> SearchBounds:
        """Collapse pinned variables to single-point ranges."""
        b = bounds
        if self.d is not None:
            b = b.replace(d_min=float(self.d), d_max=float(self.d))
        if self.n_links is not None and self.n_links > b.n_max:
            b = b.replace(n_max=int(self.n_links))
        if self.n_link_distill is not None and self.n_link_distill > b.n_link_distill_max:
            b = b.replace(n_link_distill_max=int(self.n_link_distill))
        if self.n_e2e_distill is not None and self.n_e2e_distill > b.n_e2e_distill_max:
            b = b.replace(n_e2e_distill_max=int(self.n_e2e_distill))
        return b

    def n_range(self, b: SearchBounds) -> range:
        return range(self.n_links, self.n_links + 1) if self.n_links is not None else range(1, b.n_max + 1)

    def nl_range(self, b: SearchBounds) -> range:
        v = self.n_link_distill
        return range(v, v + 1) if v is not None else range(0, b.n_link_distill_max + 1)

    def ne_range(self, b: SearchBounds) -> range:
        v = self.n_e2e_distill
        return range(v, v + 1) if v is not None else range(0, b.n_e2e_distill_max + 1)


@dataclass(frozen=True)
class Solution:
    decision: ChainDecision
    result: EvaluationResult
    method: str
    evaluations_used: int
    seed: int | None = None
    history: tuple[float, ...] = field(default=(), compare=False)
    found = True

    @property
    def objective_km(self) -> float:
        return self.decision.objective


@dataclass(frozen=True)
class NoFeasibleSolution:
    method: str
    evaluations_used: int
    seed: int | None = None
    history: tuple[float, ...] = field(default=(), compare=False)
    found = False
    objective_km = None
    decision = None
    result = None


def distill_cap(r0: float, r_min: float) -> int:
    """Rounds after which the rate surely falls below ``r_min``: each round at least halves it."""
    if r0 < r_min:
        raise QosUnachievable(f"QoS rate unachievable at zero distance (r0={r0!r} < r_min={r_min!r})")
    return int(math.floor(math.log2(r0 / r_min)))


def _max_link_fidelity(link: LinkConfig, noise: NoiseParams) -> float:
    if link.f0 < 0.5:
        return link.f0
    try:
        return max(link.f0, distill_fixed_point(link.f0, noise))
    except (DistillationInfeasible, FixedPointNotConverged):
        return link.f0


def _reachable_e2e(f_e1: float, cap: int, noise: NoiseParams) -> float:
    best = f_e1
    f = f_e1
    for _ in range(cap):
        if f < 0.5:
            break
        f = distill_n_rounds(1, f, noise).final
        best = max(best, f)
    return best


def derive_n_max(link: LinkConfig, noise: NoiseParams, qos: QosRequirement, e2e_cap: int,
                 hard_cap: int = DEFAULT_N_HARD_CAP) -> int:
    """Largest link count whose best-case end-to-end fidelity can still reach ``f_min``."""
    f_link = _max_link_fidelity(link, noise)
    n_max = 1
    for n in range(1, hard_cap + 1):
        f_e1 = swap_chain_fidelity(f_link, n, noise)
        if _reachable_e2e(f_e1, e2e_cap, noise) >= qos.f_min:
            n_max = n
        else:
            break
    return n_max


def derive_bounds(link: LinkConfig, noise: NoiseParams, qos: QosRequirement,
                  n_hard_cap: int = DEFAULT_N_HARD_CAP, **overrides) -> SearchBounds:
    """
    Finite search bounds implied by the QoS floors, with explicit overrides winning.

    ``d_max`` is where the undistilled rate hits ``r_min``; the distillation caps
    are the number of halvings ``r0`` can absorb before dropping below ``r_min``.
    """
    cap = distill_cap(link.r0, qos.r_min)
    values = dict(
        d_min=0.0,
        d_max=link.l0 * math.log(link.r0 / qos.r_min),
        d_coarse_step=DEFAULT_COARSE_STEP,
        d_refine_step=DEFAULT_REFINE_STEP,
        n_link_distill_max=cap,
        n_e2e_distill_max=cap,
    )
    unknown = set(overrides) - set(values) - {"n_max"}
    if unknown:
        raise ValueError(f"unknown bound override(s): {sorted(unknown)}")
    values.update({k: v for k, v in overrides.items() if v is not None and k != "n_max"})
    n_max = overrides.get("n_max")
    if n_max is None:
        n_max = derive_n_max(link, noise, qos, values["n_e2e_distill_max"], n_hard_cap)
    return SearchBounds(n_max=int(n_max), **values)


def tie_key(r: EvaluationResult) -> tuple:
    d = r.decision
    return (d.n_links, d.distill_rounds, -r.e2e_fidelity, d.d, d.n_link_distill, d.n_e2e_distill)


def select_best(results: Iterable[EvaluationResult]) -> EvaluationResult | None:
    """
    Feasible result with the largest objective. Results within ``OBJECTIVE_TIE_TOL``
    of the maximum are ordered by fewer links, fewer distillation rounds, higher
    fidelity, then smaller separation. Independent of input order.
    """
    feasible = [r for r in results if r.feasible]
    if not feasible:
        return None
    top = max(r.objective for r in feasible)
    return min((r for r in feasible if r.objective >= top - OBJECTIVE_TIE_TOL), key=tie_key)


class _Counter:
    def __init__(self, link, noise, qos):
        self.link, self.noise, self.qos = link, noise, qos
        self.calls = 0

    def __call__(self, decision: ChainDecision) -> EvaluationResult:
        self.calls += 1
        return evaluate(decision, self.link, self.noise, self.qos)


def _last_feasible(lo: int, hi: int, guess: int, at: Callable[[int], EvaluationResult],
                   lo_result: EvaluationResult, step: int = 1) -> EvaluationResult:
    """
    Largest feasible index in ``lo, lo+step, ..., <= hi`` given that ``lo`` is
    feasible and feasibility holds on a prefix. Starts from ``guess`` and walks.
    """
    top = lo + ((hi - lo) // step) * step
    i = min(max(lo + ((guess - lo) // step) * step, lo), top)
    best = lo_result if i == lo else at(i)
    if best.feasible:
        while i + step <= top:
            nxt = at(i + step)
            if not nxt.feasible:
                break
            i, best = i + step, nxt
        return best
    while True:
        i -= step
        if i <= lo:
            return lo_result
        best = at(i)
        if best.feasible:
            return best


def _rate_guess(bounds: SearchBounds, link: LinkConfig, qos: QosRequirement, r_lo: EvaluationResult) -> int:
    # rate(d) = rate(d_lo) * exp(-(d - d_lo) / l0)
    d_star = r_lo.decision.d + link.l0 * math.log(r_lo.e2e_rate / qos.r_min)
    return int(math.floor((d_star - bounds.d_min) / bounds.d_refine_step + 1e-9))


def exhaustive_search(link: LinkConfig, noise: NoiseParams, qos: QosRequirement, bounds: SearchBounds,
                      pins: Pins | None = None, refine: bool = True) -> Solution | NoFeasibleSolution:
    """
    Grid search over every (n_links, n_link_distill, n_e2e_distill) with the
    separation located on the coarse grid, then refined on the fine grid.

    For each integer triple the end-to-end fidelity is independent of ``d`` and
    the rate decreases in ``d``, so only the largest feasible ``d`` matters; it
    is located from the analytic rate bound and confirmed by evaluation.
    Gives the same answer as scanning every coarse point (``refine=False``) or
    every fine point (``refine=True``).
    """
    pins = pins or Pins()
    b = pins.apply(bounds)
    ev = _Counter(link, noise, qos)
    m = b.coarse_ratio
    j_hi = b.fine_count - 1
    j_coarse_hi = ((b.coarse_count - 1) * m)
    try:
        total_cap = distill_cap(link.r0, qos.r_min)
    except QosUnachievable:
        total_cap = -1

    coarse: list[EvaluationResult] = []
    for nl in pins.nl_range(b):
        for ne in pins.ne_range(b):
            if nl + ne > total_cap:
                continue
            for n in pins.n_range(b):
                def at(j, n=n, nl=nl, ne=ne):
                    return ev(ChainDecision(n, b.d_at(j), nl, ne))

                lo = at(0)
                if not lo.feasible:
                    continue
                guess = _rate_guess(b, link, qos, lo)
                coarse.append(_last_feasible(0, j_coarse_hi, guess, at, lo, step=m))

    if not refine or m == 1:
        best = select_best(coarse)
    else:
        best = None
        refined: list[EvaluationResult] = []

        def upper(r):
            j = b.snap(r.decision.d)
            return r.decision.n_links * b.d_at(min(j + m - 1, j_hi))

        for r in sorted(coarse, key=lambda r: (-upper(r), tie_key(r))):
            if best is not None and upper(r) < best.objective - OBJECTIVE_TIE_TOL:
                break
            d0 = r.decision

            def at(j, d0=d0):
                return ev(dataclasses.replace(d0, d=b.d_at(j)))

            j0 = b.snap(d0.d)
            refined.append(_last_feasible(j0, min(j0 + m - 1, j_hi), _rate_guess(b, link, qos, r), at, r))
            best = select_best(refined)

    if best is None:
        return NoFeasibleSolution("exhaustive", ev.calls)
    return Solution(best.decision, best, "exhaustive", ev.calls)
