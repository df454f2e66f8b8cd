"""Executable property suites behind ``mecgame check``.

Each suite draws its instances from an explicit seed and returns a
machine-readable report: one entry per property with the number of cases
checked and, on failure, a JSON-serialisable counterexample.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from .analysis import Discretization, price_of_anarchy
from .best_response import SolverConfig, TransmissionObjective, best_cpu, best_power, min_power
from .dynamics import UpdateSchedule, improvement_tol, run
from .game import exact_potential_residual, is_nash, potential
from .model import NetworkParams, Scenario, Strategy, StrategyProfile, Task, UserParams, local_overhead

__all__ = [
    "SUITES",
    "PropertyResult",
    "SuiteReport",
    "UnknownSuiteError",
    "random_scenario",
    "random_profile",
    "random_strategy",
    "golden_section",
    "run_suite",
]


class UnknownSuiteError(ValueError):
    pass


@dataclass
class PropertyResult:
    name: str
    passed: bool = True
    checked: int = 0
    worst: float = 0.0
    counterexample: dict[str, Any] | None = None

    def record(self, ok: bool, score: float = 0.0, example: Callable[[], dict] | None = None) -> None:
        self.checked += 1
        if score > self.worst:
            self.worst = score
        if not ok and self.passed:
            self.passed = False
            self.counterexample = example() if example is not None else {}


@dataclass
class SuiteReport:
    suite: str
    seed: int
    properties: list[PropertyResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties)

    def to_dict(self) -> dict[str, Any]:
        return {"suite": self.suite, "seed": self.seed, "passed": self.passed,
                "properties": [asdict(p) for p in self.properties]}


# -- random instances ---------------------------------------------------------

def random_scenario(rng: np.random.Generator, n_users: int, n_channels: int,
                    sinr_threshold: float = 1.0, cell_radius: float = 200.0,
                    weights: str = "mixed") -> Scenario:
    """Users dropped in the cell annulus with the default network constants.

    ``weights="mixed"`` draws each user's time weight uniformly from [0, 1];
    a number fixes it for everybody.
    """
    radius = cell_radius * np.sqrt(rng.uniform((10.0 / cell_radius) ** 2, 1.0, n_users))
    wt = rng.uniform(0.0, 1.0, n_users) if weights == "mixed" else np.full(n_users, float(weights))
    users = tuple(UserParams(n, n % n_channels, float(radius[n]) ** -4.0, 1e-27, 1e9,
                             float(wt[n]), 1.0 - float(wt[n]), Task(5e6, 200.0))
                  for n in range(n_users))
    return Scenario(users, NetworkParams(n_channels, 2e7 / n_channels, 1e-13, 1e10, 0.15, sinr_threshold))


def random_strategy(rng: np.random.Generator, user: UserParams, net: NetworkParams) -> Strategy:
    """Any admissible strategy, fractional offloading included."""
    kind = rng.integers(3)
    lam = (0.0, 1.0, float(rng.uniform(0.05, 0.95)))[kind]
    power = float(rng.uniform(1e-3, 1.0)) * net.p_max if lam > 0 else 0.0
    cpu = float(rng.uniform(net.f_min_floor, user.f_max)) if lam < 1 else 0.0
    return Strategy(lam, power, cpu)


def random_profile(rng: np.random.Generator, scenario: Scenario) -> StrategyProfile:
    return StrategyProfile(tuple(random_strategy(rng, u, scenario.network) for u in scenario.users))


def golden_section(fun: Callable[[float], float], lo: float, hi: float, tol: float = 1e-13,
                   max_iter: int = 400) -> float:
    """Minimiser of a unimodal ``fun`` on ``[lo, hi]``."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if b - a <= tol * max(abs(a), abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    return min((lo, hi, x), key=fun)


def _profile_dump(profile: StrategyProfile) -> list[list[float]]:
    return [[s.lam, s.power, s.cpu] for s in profile]


def _scenario_dump(scenario: Scenario) -> dict[str, Any]:
    return {"network": asdict(scenario.network),
            "users": [asdict(u) for u in scenario.users]}


# -- suites -------------------------------------------------------------------

def _potential_suite(rng, report: SuiteReport, scale: float) -> None:
    prop = PropertyResult("exact_potential_identity")
    report.properties.append(prop)
    for _ in range(max(1, int(100 * scale))):
        scenario = random_scenario(rng, int(rng.integers(2, 13)), int(rng.integers(1, 5)))
        for _ in range(100):
            profile = random_profile(rng, scenario)
            n = int(rng.integers(scenario.num_users))
            dev = random_strategy(rng, scenario.users[n], scenario.network)
            moved = profile.replace(n, dev)
            d_phi = potential(scenario, moved) - potential(scenario, profile)
            resid = abs(exact_potential_residual(scenario, profile, n, dev))
            bound = 1e-9 * max(1.0, abs(d_phi))
            prop.record(resid <= bound, resid / bound, lambda: {
                "scenario": _scenario_dump(scenario), "profile": _profile_dump(profile),
                "user": n, "deviation": [dev.lam, dev.power, dev.cpu], "residual": resid})


def _best_response_suite(rng, report: SuiteReport, scale: float) -> None:
    cpu = PropertyResult("best_cpu_matches_golden_section")
    power = PropertyResult("best_power_matches_grid")
    report.properties += [cpu, power]
    for k in range(max(1, int(1000 * scale))):
        wt = (0.0, 1.0, float(rng.uniform()))[k % 3]
        user = UserParams(0, 0, 1e-8, float(10 ** rng.uniform(-29, -25)),
                          float(10 ** rng.uniform(8, 10)), wt, 1.0 - wt, Task(5e6, 200.0))
        floor = 1e6
        f_closed = best_cpu(user, floor)
        f_gold = golden_section(lambda f: local_overhead(user, f), floor, user.f_max)
        o_closed, o_gold = local_overhead(user, f_closed), local_overhead(user, f_gold)
        # frequencies agree only to ~sqrt(eps) near a smooth minimum, so compare overheads
        err = abs(o_closed - o_gold) / o_gold
        if wt in (0.0, 1.0) and f_closed != f_gold:
            err = math.inf  # clamped cases land exactly on an endpoint
        cpu.record(err <= 1e-9, err / 1e-9, lambda: {
            "user": asdict(user), "f_closed": f_closed, "f_golden": f_gold})

    done = 0
    while done < max(1, int(500 * scale)):
        scenario = random_scenario(rng, int(rng.integers(2, 9)), int(rng.integers(1, 4)))
        profile = random_profile(rng, scenario)
        n = int(rng.integers(scenario.num_users))
        lo, hi = min_power(scenario, profile, n), scenario.network.p_max
        if lo >= hi:
            continue
        done += 1
        p_bar, _ = best_power(scenario, profile, n)
        obj = TransmissionObjective(scenario, profile, n)
        grid_min = float(obj.value(np.linspace(lo, hi, 100_001)).min())
        got = obj.value(p_bar)
        err = (got - grid_min) / abs(grid_min)
        power.record(err <= 1e-6, err / 1e-6, lambda: {
            "scenario": _scenario_dump(scenario), "profile": _profile_dump(profile), "user": n,
            "p_bar": p_bar, "value": got, "grid_min": grid_min})


def final_structure_ok(scenario: Scenario, profile: StrategyProfile) -> bool:
    """Bang-bang structure of an equilibrium profile."""
    p_max = scenario.network.p_max
    return all(s.lam in (0.0, 1.0) and s.lam * s.cpu == 0 and (1 - s.lam) * s.power == 0
               and s.power <= p_max for s in profile)


def _convergence_suite(rng, report: SuiteReport, scale: float) -> None:
    from .experiments import best_response_candidates

    conv = PropertyResult("converges_within_500_rounds")
    descent = PropertyResult("potential_non_increasing")
    shape = PropertyResult("final_profile_structure")
    nash = PropertyResult("final_profile_is_nash")
    report.properties += [conv, descent, shape, nash]
    cfg = SolverConfig()
    for _ in range(max(1, int(100 * scale))):
        n_users = int(rng.integers(8, 21))
        scenario = random_scenario(rng, n_users, 10, weights=0.5)
        trace = run(scenario, UpdateSchedule("round_robin"), cfg, 500)
        dump = lambda: {"scenario": _scenario_dump(scenario),  # noqa: E731
                        "final": _profile_dump(trace.final_profile)}
        conv.record(trace.converged, 0.0, dump)
        phis = [trace.initial.potential] + [r.potential for r in trace.rounds]
        rise = max((b - a) / max(1.0, abs(a)) for a, b in zip(phis, phis[1:])) if len(phis) > 1 else 0.0
        descent.record(rise <= 1e-12, max(rise, 0.0), lambda: {"potentials": phis, **dump()})
        final = trace.final_profile
        shape.record(final_structure_ok(scenario, final), 0.0, dump)
        eps = 10 * improvement_tol(scenario, final, cfg)
        cert = is_nash(scenario, final, best_response_candidates(scenario, final, cfg), eps)
        nash.record(bool(cert), cert.improvement / eps, lambda: {
            "user": cert.user, "improvement": cert.improvement, **dump()})


def _poa_suite(rng, report: SuiteReport, scale: float) -> None:
    sandwich = PropertyResult("poa_sandwich")
    opt = PropertyResult("optimum_not_above_equilibrium")
    report.properties += [sandwich, opt]
    for _ in range(max(1, int(20 * scale))):
        scenario = random_scenario(rng, int(rng.integers(2, 5)), 2, weights=0.5)
        trace = run(scenario, UpdateSchedule("round_robin"))
        rep = price_of_anarchy(scenario, trace.final_profile, Discretization())
        dump = lambda: {"scenario": _scenario_dump(scenario),  # noqa: E731
                        "ne": _profile_dump(trace.final_profile), "poa": rep.poa,
                        "upper_bound": rep.upper_bound, "ne_total": rep.ne_total,
                        "opt_total": rep.opt_total}
        sandwich.record(1 - 1e-6 <= rep.poa <= rep.upper_bound + 1e-6, 0.0, dump)
        opt.record(rep.opt_total <= rep.ne_total, 0.0, dump)


SUITES: dict[str, Callable] = {
    "potential": _potential_suite,
    "best_response": _best_response_suite,
    "convergence": _convergence_suite,
    "poa": _poa_suite,
}


def run_suite(name: str, seed: int = 0, scale: float = 1.0) -> SuiteReport:
    """Run one property suite; ``scale`` multiplies every instance count."""
    if name not in SUITES:
        raise UnknownSuiteError(f"unknown suite '{name}' (choose from {', '.join(SUITES)})")
    report = SuiteReport(name, seed)
    SUITES[name](np.random.default_rng(seed), report, scale)
    return report
