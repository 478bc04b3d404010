"""
End-to-end fidelity and entanglement generation rate of a linear repeater chain.

Pipeline per decision: link-level distillation, deterministic swapping across
``n_links`` links, then end-to-end distillation. Rates follow the expected
pair-consumption bookkeeping: each distillation round multiplies the rate by
``P_S / 2``; swapping leaves it unchanged.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .model import (
    DistillationInfeasible,
    DistillationTrace,
    NoiseParams,
    distill_n_rounds,
    swap_chain_fidelity,
)

__all__ = [
    "ChainDecision",
    "EvaluationResult",
    "Infeasibility",
    "LinkConfig",
    "QosRequirement",
    "e2e_initial_fidelity",
    "evaluate",
    "link_fidelity",
    "link_rate",
]


@dataclass(frozen=True)
class LinkConfig:
    """Per-link physics. ``d`` is a default separation used only for single-link rate queries."""

    f0: float = 0.99
    r0: float = 1e5
    l0: float = 0.542
    d: float = 0.0

    def __post_init__(self):
        if not (0.25 <= self.f0 <= 1.0):
            raise ValueError(f"f0 must lie in [0.25, 1], got {self.f0!r}")
        if not self.r0 > 0:
            raise ValueError(f"r0 must be positive, got {self.r0!r}")
        if not self.l0 > 0:
            raise ValueError(f"l0 must be positive, got {self.l0!r}")
        if not self.d >= 0:
            raise ValueError(f"d must be >= 0, got {self.d!r}")

    def transmission(self, d: float) -> float:
        return math.exp(-d / self.l0)


@dataclass(frozen=True, order=True)
class ChainDecision:
    """Decision vector: link count, node separation (km), link and end-to-end distillation rounds."""

    n_links: int
    d: float
    n_link_distill: int = 0
    n_e2e_distill: int = 0

    def __post_init__(self):
        if int(self.n_links) != self.n_links or self.n_links < 1:
            raise ValueError(f"n_links must be an integer >= 1, got {self.n_links!r}")
        if not self.d >= 0:
            raise ValueError(f"d must be >= 0, got {self.d!r}")
        for name in ("n_link_distill", "n_e2e_distill"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be an integer >= 0, got {v!r}")

    @property
    def repeaters(self) -> int:
        return self.n_links - 1

    @property
    def objective(self) -> float:
        return self.n_links * self.d

    @property
    def distill_rounds(self) -> int:
        return self.n_link_distill + self.n_e2e_distill


@dataclass(frozen=True)
class QosRequirement:
    r_min: float = 1.0
    f_min: float = 0.5

    def __post_init__(self):
        if not self.r_min > 0:
            raise ValueError(f"r_min must be positive, got {self.r_min!r}")
        if not (0.25 <= self.f_min <= 1.0):
            raise ValueError(f"f_min must lie in [0.25, 1], got {self.f_min!r}")


class Infeasibility(str, enum.Enum):
    NONE = "none"
    RATE_BELOW_MIN = "rate_below_min"
    FIDELITY_BELOW_MIN = "fidelity_below_min"
    DISTILL_PRECONDITION_VIOLATED = "distill_precondition_violated"


@dataclass(frozen=True)
class EvaluationResult:
    """
    Outcome of evaluating one decision.

    When a distillation round is refused (input fidelity < 1/2) the traces are
    truncated before the refused round and ``e2e_fidelity`` / ``e2e_rate`` hold
    the last values reached.
    """

    decision: ChainDecision
    feasible: bool
    e2e_fidelity: float
    e2e_rate: float
    link_fidelity: float
    link_rate: float
    link_trace: DistillationTrace
    e2e_trace: DistillationTrace
    reason: Infeasibility = Infeasibility.NONE
    violation: float = field(default=0.0, compare=False)

    @property
    def objective(self) -> float:
        return self.decision.objective


def link_fidelity(n_link_distill: int, f0: float, noise: NoiseParams) -> float:
    return distill_n_rounds(n_link_distill, f0, noise).final


def link_rate(link: LinkConfig, n_link_distill: int, noise: NoiseParams, d: float | None = None) -> float:
    """Link-level generation rate after ``n_link_distill`` rounds at separation ``d`` (default ``link.d``)."""
    d = link.d if d is None else d
    trace = distill_n_rounds(n_link_distill, link.f0, noise)
    return link.r0 * link.transmission(d) * trace.rate_factor()


def e2e_initial_fidelity(decision: ChainDecision, f0: float, noise: NoiseParams) -> float:
    return swap_chain_fidelity(link_fidelity(decision.n_link_distill, f0, noise), decision.n_links, noise)


def _partial_trace(n: int, f0: float, noise: NoiseParams) -> tuple[DistillationTrace, bool]:
    # longest feasible prefix of the n-round trace
    try:
        return distill_n_rounds(n, f0, noise), True
    except DistillationInfeasible as exc:
        return distill_n_rounds(exc.round_index - 1, f0, noise), False


def evaluate(decision: ChainDecision, link: LinkConfig, noise: NoiseParams, qos: QosRequirement) -> EvaluationResult:
    """Fidelity, rate and QoS feasibility of ``decision``. The separation is taken from the decision."""
    base_rate = link.r0 * link.transmission(decision.d)

    link_trace, ok = _partial_trace(decision.n_link_distill, link.f0, noise)
    f_link = link_trace.final
    r_link = base_rate * link_trace.rate_factor()
    if not ok:
        empty = DistillationTrace((f_link,), ())
        return EvaluationResult(decision, False, f_link, r_link, f_link, r_link, link_trace, empty,
                                Infeasibility.DISTILL_PRECONDITION_VIOLATED,
                                _violation(qos, f_link, r_link, refused=True))

    f_e1 = swap_chain_fidelity(f_link, decision.n_links, noise)
    e2e_trace, ok = _partial_trace(decision.n_e2e_distill, f_e1, noise)
    f_e2e = e2e_trace.final
    r_e2e = r_link * e2e_trace.rate_factor()

    if not ok:
        reason = Infeasibility.DISTILL_PRECONDITION_VIOLATED
    elif r_e2e < qos.r_min:
        reason = Infeasibility.RATE_BELOW_MIN
    elif f_e2e < qos.f_min:
        reason = Infeasibility.FIDELITY_BELOW_MIN
    else:
        reason = Infeasibility.NONE
    feasible = reason is Infeasibility.NONE
    violation = 0.0 if feasible else _violation(qos, f_e2e, r_e2e, refused=not ok)
    return EvaluationResult(decision, feasible, f_e2e, r_e2e, f_link, r_link, link_trace, e2e_trace,
                            reason, violation)


def _violation(qos: QosRequirement, fidelity: float, rate: float, refused: bool) -> float:
    """Scalar constraint-violation magnitude used to rank infeasible points."""
    v = max(0.0, qos.f_min - fidelity) / qos.f_min
    if rate > 0:
        v += max(0.0, math.log(qos.r_min / rate))
    else:
        v += 1e3
    if refused:
        v += 1.0 + max(0.0, 0.5 - fidelity)
    return v
