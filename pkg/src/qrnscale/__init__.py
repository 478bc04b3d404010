"""Scalability planning for homogeneous linear quantum repeater chains."""

from .chain import (ChainDecision, EvaluationResult, Infeasibility, LinkConfig, QosRequirement,
                    e2e_initial_fidelity, evaluate, link_fidelity, link_rate)
from .model import (PERFECT, DistillationInfeasible, DistillationTrace, NoiseParams, distill_fidelity,
                    distill_fixed_point, distill_n_rounds, distill_success_prob, swap_chain_fidelity,
                    swap_chain_fidelity_hetero, werner_fidelity)
from .search import NoFeasibleSolution, Pins, SearchBounds, Solution, derive_bounds, exhaustive_search

__version__ = "0.1.0"
