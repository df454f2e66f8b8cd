"""Local-altruistic utilities, the potential function and the NE predicate.

A user's utility is its own overhead plus the overheads of the co-channel
users that currently transmit, all evaluated at the same joint profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .model import Scenario, Strategy, StrategyProfile, interference_set, total_overhead

__all__ = [
    "altruistic_utility",
    "all_utilities",
    "potential",
    "exact_potential_residual",
    "NashCertificate",
    "is_nash",
]


def altruistic_utility(scenario: Scenario, profile: StrategyProfile, n: int) -> float:
    terms = [total_overhead(scenario, profile, n)]
    terms += [total_overhead(scenario, profile, i) for i in sorted(interference_set(scenario, profile, n))]
    return math.fsum(terms)


def all_utilities(scenario: Scenario, profile: StrategyProfile) -> list[float]:
    overheads = [total_overhead(scenario, profile, n) for n in range(scenario.num_users)]
    out = []
    for n in range(scenario.num_users):
        neighbours = sorted(interference_set(scenario, profile, n))
        out.append(math.fsum([overheads[n]] + [overheads[i] for i in neighbours]))
    return out


def potential(scenario: Scenario, profile: StrategyProfile) -> float:
    """Network-wide total overhead, the exact potential of the game."""
    return math.fsum(total_overhead(scenario, profile, n) for n in range(scenario.num_users))


def exact_potential_residual(scenario: Scenario, profile: StrategyProfile, n: int,
                             s_new: Strategy) -> float:
    """``ΔU_n - ΔΦ`` for the unilateral move of user ``n`` to ``s_new``.

    Identically zero for an exact potential game; floating point leaves a
    residual of the order of machine epsilon times the overheads involved.
    """
    moved = profile.replace(n, s_new)
    d_utility = altruistic_utility(scenario, moved, n) - altruistic_utility(scenario, profile, n)
    d_potential = potential(scenario, moved) - potential(scenario, profile)
    return d_utility - d_potential


@dataclass(frozen=True)
class NashCertificate:
    is_nash: bool
    user: int | None = None
    deviation: Strategy | None = None
    improvement: float = 0.0

    def __bool__(self) -> bool:
        return self.is_nash


def is_nash(scenario: Scenario, profile: StrategyProfile,
            deviation_candidates: Sequence[Sequence[Strategy]], eps: float) -> NashCertificate:
    """Check the ε-Nash condition against finite per-user candidate sets.

    The result certifies equilibrium only relative to ``deviation_candidates``.
    When some user can improve by more than ``eps`` the certificate carries
    the deviation with the largest improvement.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    best_gain = 0.0
    witness: tuple[int, Strategy] | None = None
    for n, candidates in enumerate(deviation_candidates):
        current = altruistic_utility(scenario, profile, n)
        for cand in candidates:
            gain = current - altruistic_utility(scenario, profile.replace(n, cand), n)
            if gain > eps and gain > best_gain:
                best_gain = gain
                witness = (n, cand)
    if witness is None:
        return NashCertificate(True)
    return NashCertificate(False, witness[0], witness[1], best_gain)
