"""
Werner-state fidelity algebra for a homogeneous repeater chain.

Covers noisy entanglement swapping over a chain of links and the symmetric
two-copy distillation map with gate (``p2``) and measurement (``eta``) noise.
All functions are pure and operate on plain floats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

__all__ = [
    "DistillationInfeasible",
    "DistillationTrace",
    "NoiseParams",
    "PERFECT",
    "distill_fidelity",
    "distill_fixed_point",
    "distill_n_rounds",
    "distill_success_prob",
    "swap_chain_fidelity",
    "swap_chain_fidelity_hetero",
    "werner_fidelity",
]

MIN_DISTILL_FIDELITY = 0.5
FIXED_POINT_MAX_ITER = 10_000
_ROUNDOFF = 1e-12


class DistillationInfeasible(ValueError):
    """Raised when a distillation round receives a state with fidelity below 1/2."""

    def __init__(self, fidelity: float, round_index: int | None = None):
        self.fidelity = fidelity
        self.round_index = round_index
        where = "" if round_index is None else f" at round {round_index}"
        super().__init__(f"distillation input fidelity {fidelity!r} < 0.5{where}")


class FixedPointNotConverged(ArithmeticError):
    def __init__(self, last: float, iterations: int):
        self.last = last
        self.iterations = iterations
        super().__init__(f"no fixed point after {iterations} iterations (last iterate {last!r})")


@dataclass(frozen=True)
class NoiseParams:
    """Gate fidelity ``p2`` and measurement fidelity ``eta`` shared by every node."""

    p2: float = 0.99
    eta: float = 0.99

    def __post_init__(self):
        for name in ("p2", "eta"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0):
                raise ValueError(f"{name} must lie in (0, 1], got {v!r}")

    @property
    def swap_factor(self) -> float:
        """Per-swap depolarising factor ``p2 (4 eta^2 - 1) / 3``."""
        return self.p2 * (4.0 * self.eta**2 - 1.0) / 3.0


PERFECT = NoiseParams(1.0, 1.0)


@dataclass(frozen=True)
class DistillationTrace:
    """
    Fidelities entering each round plus the final output, and the success
    probability of each round. ``fidelities[i]`` is the input of round ``i+1``.
    """

    fidelities: tuple[float, ...]
    success_probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.fidelities) != len(self.success_probs) + 1:
            raise ValueError("trace needs exactly one more fidelity than success probability")

    @property
    def rounds(self) -> int:
        return len(self.success_probs)

    @property
    def final(self) -> float:
        return self.fidelities[-1]

    def rate_factor(self) -> float:
        """Product of ``P_S / 2`` over rounds; 1.0 for an empty trace."""
        factor = 1.0
        for p in self.success_probs:
            factor /= 2.0 / p
        return factor


def _check_fidelity(f: float, name: str = "fidelity") -> None:
    if not (0.25 - _ROUNDOFF <= f <= 1.0 + _ROUNDOFF):
        raise ValueError(f"{name} must lie in [0.25, 1], got {f!r}")


def werner_fidelity(w: float) -> float:
    """Fidelity ``(3w + 1) / 4`` of a Werner state with Bell-state weight ``w``."""
    if not (0.0 <= w <= 1.0):
        raise ValueError(f"Werner weight must lie in [0, 1], got {w!r}")
    return (3.0 * w + 1.0) / 4.0


def swap_chain_fidelity_hetero(link_fidelities: Sequence[float], noise: NoiseParams) -> float:
    """End-to-end fidelity after swapping across links of possibly different fidelity."""
    n = len(link_fidelities)
    if n < 1:
        raise ValueError("need at least one link")
    prod = 1.0
    for f in link_fidelities:
        _check_fidelity(f, "link fidelity")
        prod *= (4.0 * f - 1.0) / 3.0
    return 0.25 + 0.75 * noise.swap_factor ** (n - 1) * prod


def swap_chain_fidelity(f_link: float, n_links: int, noise: NoiseParams) -> float:
    """End-to-end fidelity after ``n_links - 1`` swaps over identical links."""
    if n_links < 1:
        raise ValueError(f"n_links must be >= 1, got {n_links!r}")
    _check_fidelity(f_link, "link fidelity")
    return 0.25 + 0.75 * noise.swap_factor ** (n_links - 1) * ((4.0 * f_link - 1.0) / 3.0) ** n_links


def _terms(f_in: float, noise: NoiseParams) -> tuple[float, float, float, float, float, float]:
    # kept term-by-term so each line matches its published counterpart
    p2, eta = noise.p2, noise.eta
    a = f_in**2 + ((1.0 - f_in) / 3.0) ** 2
    b = eta**2 + (1.0 - eta) ** 2
    c = f_in * ((1.0 - f_in) / 3.0) + ((1.0 - f_in) / 3.0) ** 2
    d = 2.0 * eta * (1.0 - eta)
    e = (1.0 - p2**2) / (8.0 * p2**2)
    h = f_in**2 + (2.0 / 3.0) * f_in * (1.0 - f_in) + (5.0 / 9.0) * (1.0 - f_in) ** 2
    return a, b, c, d, e, h


def _check_distill_input(f_in: float) -> None:
    if f_in > 1.0 + _ROUNDOFF:
        raise ValueError(f"fidelity must be <= 1, got {f_in!r}")
    if not f_in >= MIN_DISTILL_FIDELITY:
        raise DistillationInfeasible(f_in)


def distill_fidelity(f_in: float, noise: NoiseParams) -> float:
    """Output fidelity of one noisy distillation round on two copies of fidelity ``f_in``."""
    _check_distill_input(f_in)
    a, b, c, d, e, h = _terms(f_in, noise)
    return (a * b + c * d + e) / (h * b + c * 4.0 * d + 4.0 * e)


def distill_success_prob(f_in: float, noise: NoiseParams) -> float:
    """Probability that one distillation round on two copies of fidelity ``f_in`` succeeds."""
    _check_distill_input(f_in)
    _, b, c, d, e, h = _terms(f_in, noise)
    p = noise.p2**2 * (h * b + c * 4.0 * d + 4.0 * e)
    if not (0.0 < p <= 1.0 + 1e-12):
        raise ArithmeticError(f"success probability {p!r} outside (0, 1]")
    return p


@lru_cache(maxsize=65536)
def distill_n_rounds(n: int, f0: float, noise: NoiseParams) -> DistillationTrace:
    """
    Iterate the distillation map ``n`` times starting from ``f0``.

    Raises DistillationInfeasible naming the (1-based) round whose input
    dropped below 1/2.
    """
    if n < 0:
        raise ValueError(f"round count must be >= 0, got {n!r}")
    _check_fidelity(f0, "initial fidelity")
    fids = [f0]
    probs = []
    f = f0
    for i in range(1, n + 1):
        if not f >= MIN_DISTILL_FIDELITY:
            raise DistillationInfeasible(f, i)
        probs.append(distill_success_prob(f, noise))
        f = distill_fidelity(f, noise)
        fids.append(f)
    return DistillationTrace(tuple(fids), tuple(probs))


def distill_fixed_point(f_start: float, noise: NoiseParams, tol: float = 1e-12,
                        max_iter: int = FIXED_POINT_MAX_ITER) -> float:
    """Fidelity the distillation map settles at when iterated from ``f_start``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    f = f_start
    for i in range(max_iter):
        nxt = distill_fidelity(f, noise)
        if abs(nxt - f) < tol:
            return nxt
        if not math.isfinite(nxt):
            break
        f = nxt
    raise FixedPointNotConverged(f, max_iter)
