"""Best-response dynamics from the all-offload start to a Nash equilibrium."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .best_response import SolverConfig, best_cpu, best_response, min_power
from .game import all_utilities, altruistic_utility, potential
from .model import Scenario, Strategy, StrategyProfile, all_overheads

__all__ = [
    "ScheduleKind",
    "UpdateSchedule",
    "RoundSnapshot",
    "IterationTrace",
    "initialize",
    "step",
    "run",
    "improvement_tol",
]

log = logging.getLogger(__name__)

# slack on the SINR floor before a kept strategy counts as infeasible
P_MIN_RTOL = 1e-9


class ScheduleKind(str, Enum):
    ROUND_ROBIN = "round_robin"
    RANDOM_PERMUTATION = "random_permutation"
    SIMULTANEOUS = "simultaneous"


@dataclass(frozen=True)
class UpdateSchedule:
    kind: ScheduleKind = ScheduleKind.RANDOM_PERMUTATION
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))

    @property
    def sequential(self) -> bool:
        return self.kind is not ScheduleKind.SIMULTANEOUS


@dataclass(frozen=True)
class RoundSnapshot:
    round: int
    profile: StrategyProfile
    overheads: tuple[float, ...]
    utilities: tuple[float, ...]
    potential: float
    offloader_count: int

    @classmethod
    def capture(cls, scenario: Scenario, profile: StrategyProfile, index: int) -> "RoundSnapshot":
        overheads = all_overheads(scenario, profile)
        return cls(index, profile, tuple(overheads), tuple(all_utilities(scenario, profile)),
                   potential(scenario, profile), profile.offloader_count)


@dataclass
class IterationTrace:
    initial: RoundSnapshot
    rounds: list[RoundSnapshot] = field(default_factory=list)
    converged: bool = False

    @property
    def rounds_to_converge(self) -> int:
        return len(self.rounds)

    @property
    def final(self) -> RoundSnapshot:
        return self.rounds[-1] if self.rounds else self.initial

    @property
    def final_profile(self) -> StrategyProfile:
        return self.final.profile


def improvement_tol(scenario: Scenario, profile: StrategyProfile, cfg: SolverConfig) -> float:
    return cfg.improvement_rtol * max(1.0, potential(scenario, profile))


def initialize(scenario: Scenario) -> StrategyProfile:
    """Everyone offloads at full power; users that cannot reach the SINR
    threshold even without interference start locally at their best CPU."""
    net = scenario.network
    strategies = []
    for u in scenario.users:
        if net.sinr_threshold * net.noise_power / u.channel_gain <= net.p_max:
            strategies.append(Strategy(1.0, net.p_max, 0.0))
        else:
            log.info("user %d cannot offload even without interference; starting local", u.user_id)
            strategies.append(Strategy(0.0, 0.0, best_cpu(u, net.f_min_floor)))
    return StrategyProfile(tuple(strategies))


def _feasible(scenario: Scenario, profile: StrategyProfile, n: int) -> bool:
    s = profile[n]
    u = scenario.users[n]
    if s.lam < 1 and not 0 < s.cpu <= u.f_max:
        return False
    if s.lam > 0:
        if s.power > scenario.network.p_max:
            return False
        if s.power < min_power(scenario, profile, n) * (1 - P_MIN_RTOL):
            return False
    return True


def _same(a: Strategy, b: Strategy, power_rtol: float) -> bool:
    if a.lam != b.lam or a.cpu != b.cpu:
        return False
    return abs(a.power - b.power) <= power_rtol * max(a.power, b.power)


def _proposal(scenario: Scenario, profile: StrategyProfile, n: int, cfg: SolverConfig,
              tol: float) -> Strategy | None:
    """User ``n``'s best response if it should replace the current strategy."""
    new = best_response(scenario, profile, n, cfg).strategy
    if _feasible(scenario, profile, n):
        gain = (altruistic_utility(scenario, profile, n)
                - altruistic_utility(scenario, profile.replace(n, new), n))
        if gain <= tol:
            return None
    return new


def step(scenario: Scenario, profile: StrategyProfile, n: int,
         cfg: SolverConfig = SolverConfig()) -> tuple[StrategyProfile, bool]:
    """Offer user ``n`` one best-response update.

    The best response replaces the current strategy when it lowers ``U_n`` by
    more than the improvement tolerance, or unconditionally when the current
    strategy no longer meets the SINR threshold.  ``changed`` is False when
    the replacement only moves the power within ``cfg.power_rtol``.
    """
    new = _proposal(scenario, profile, n, cfg, improvement_tol(scenario, profile, cfg))
    if new is None:
        return profile, False
    return profile.replace(n, new), not _same(profile[n], new, cfg.power_rtol)


def run(scenario: Scenario, schedule: UpdateSchedule = UpdateSchedule(),
        cfg: SolverConfig = SolverConfig(), max_rounds: int = 500) -> IterationTrace:
    """Iterate best responses until a full round changes nothing."""
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    rng = np.random.default_rng(schedule.rng_seed)
    n_users = scenario.num_users
    profile = initialize(scenario)
    trace = IterationTrace(RoundSnapshot.capture(scenario, profile, 0))

    for index in range(1, max_rounds + 1):
        any_change = False
        if schedule.kind is ScheduleKind.SIMULTANEOUS:
            tol = improvement_tol(scenario, profile, cfg)
            proposals = [_proposal(scenario, profile, n, cfg, tol) for n in range(n_users)]
            updated = list(profile.strategies)
            for n, new in enumerate(proposals):
                if new is not None:
                    any_change |= not _same(profile[n], new, cfg.power_rtol)
                    updated[n] = new
            profile = StrategyProfile(tuple(updated))
        else:
            if schedule.kind is ScheduleKind.ROUND_ROBIN:
                order = range(n_users)
            else:
                order = rng.permutation(n_users).tolist()
            for n in order:
                profile, changed = step(scenario, profile, n, cfg)
                any_change |= changed
        trace.rounds.append(RoundSnapshot.capture(scenario, profile, index))
        if not any_change:
            trace.converged = True
            break
    return trace
