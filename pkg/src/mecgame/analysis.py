"""Solution-quality oracles for small instances.

Everything here enumerates the offload decisions exhaustively, so it is
guarded against instances that would need more than ``GUARD_NODES``
enumeration nodes.  Powers are searched on per-user grids and refined with
a bounded scalar minimiser, which makes :func:`centralized_optimum` an
upper-bounding oracle for the true optimum over continuous powers.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .best_response import SolverConfig, best_cpu, best_power
from .game import all_utilities, potential
from .model import (
    InfeasibleStrategyError,
    NetworkParams,
    Scenario,
    Strategy,
    StrategyProfile,
    UserParams,
    batch_overheads,
    interference_set,
    local_overhead,
    sinr,
)

__all__ = [
    "GUARD_NODES",
    "EnumerationGuardError",
    "Discretization",
    "PoAReport",
    "centralized_optimum",
    "price_of_anarchy",
    "poa_upper_bound",
    "pareto_check",
    "ne_oracle",
    "inverse_network_sinr",
]

GUARD_NODES = 2**20
SINR_RTOL = 1e-9


class EnumerationGuardError(ValueError):
    """The instance is too large for exhaustive enumeration."""


@dataclass(frozen=True)
class Discretization:
    """Search space of the enumeration oracles.

    ``cpu_levels`` entries are ``"best"`` (closed-form best CPU), ``"max"``
    (``f_max``) or a frequency in Hz.  Only ``"best"`` is needed for optimum
    and dominance searches because the CPU frequency of a local user affects
    nobody else's overhead.
    """

    lambda_levels: tuple[float, ...] = (0.0, 1.0)
    power_levels_per_user: int = 33
    cpu_levels: tuple = ("best",)

    def __post_init__(self):
        if not self.lambda_levels or not self.cpu_levels:
            raise ValueError("discretization grids must be non-empty")
        if any(not 0 <= v <= 1 for v in self.lambda_levels):
            raise ValueError("lambda levels must lie in [0, 1]")
        if self.power_levels_per_user < 2:
            raise ValueError("power_levels_per_user must be at least 2")

    def cpu_values(self, user: UserParams, net: NetworkParams) -> list[float]:
        out = []
        for level in self.cpu_levels:
            if level == "best":
                out.append(best_cpu(user, net.f_min_floor))
            elif level == "max":
                out.append(user.f_max)
            else:
                out.append(min(float(level), user.f_max))
        return sorted(set(out))


@dataclass(frozen=True)
class PoAReport:
    ne_total: float
    opt_total: float
    poa: float
    upper_bound: float
    opt_profile: StrategyProfile
    ne_potential: float
    opt_potential: float

    @property
    def potential_ratio(self) -> float:
        """Σ O_n(NE) / Σ O_n(opt); secondary metric free of neighbour double counting."""
        return self.ne_potential / self.opt_potential


# -- enumeration helpers -----------------------------------------------------

class _Space:
    """Fixed-decision slice of the joint strategy space."""

    def __init__(self, scenario: Scenario, lam: Sequence[float], cpu: Sequence[float]):
        self.scenario = scenario
        self.lam = np.asarray(lam, dtype=float)
        self.cpu = np.asarray(cpu, dtype=float)
        n_users = scenario.num_users
        self.off = [n for n in range(n_users) if self.lam[n] > 0]
        self.gain = np.array([u.channel_gain for u in scenario.users])
        # utility matrix: U = O @ A.T
        a = np.eye(n_users)
        for n in range(n_users):
            for i in scenario.co_channel[n]:
                if self.lam[i] > 0:
                    a[n, i] = 1.0
        self.mix = a
        self.weights = a.sum(axis=0)

    def overheads(self, powers: np.ndarray) -> np.ndarray:
        return batch_overheads(self.scenario, self.lam, powers, self.cpu)

    def utilities(self, powers: np.ndarray) -> np.ndarray:
        return self.overheads(powers) @ self.mix.T

    def total(self, powers: np.ndarray) -> np.ndarray:
        return self.overheads(powers) @ self.weights

    def interference(self, powers: np.ndarray, n: int, exclude: int | None = None) -> np.ndarray:
        idx = [i for i in self.scenario.co_channel[n] if self.lam[i] > 0 and i != exclude]
        if not idx:
            return np.zeros(powers.shape[0])
        return (powers[:, idx] * self.gain[idx]).sum(axis=1)

    def feasible(self, powers: np.ndarray) -> np.ndarray:
        net = self.scenario.network
        ok = np.ones(powers.shape[0], dtype=bool)
        for n in self.off:
            p = powers[:, n]
            need = net.sinr_threshold * (net.noise_power + self.interference(powers, n)) / self.gain[n]
            ok &= (p <= net.p_max * (1 + 1e-12)) & (p >= need * (1 - SINR_RTOL))
        return ok

    def minimal_powers(self) -> np.ndarray | None:
        """Smallest jointly SINR-feasible powers, or None if none exist."""
        net = self.scenario.network
        theta = net.sinr_threshold
        p = np.zeros(self.scenario.num_users)
        by_channel: dict[int, list[int]] = {}
        for n in self.off:
            by_channel.setdefault(self.scenario.users[n].channel, []).append(n)
        for members in by_channel.values():
            # equal received powers x solve x = θ (N0 + (m-1) x)
            denom = 1.0 - theta * (len(members) - 1)
            if denom <= 0:
                return None
            x = theta * net.noise_power / denom
            for n in members:
                p[n] = x / self.gain[n]
        if np.any(p > net.p_max * (1 + 1e-12)):
            return None
        return np.minimum(p, net.p_max)

    def joint_interval(self, powers: np.ndarray, n: int) -> tuple[float, float]:
        """Feasible range of ``p_n`` keeping every offloader's SINR ≥ θ."""
        net = self.scenario.network
        theta = net.sinr_threshold
        row = powers[None, :]
        lo = theta * (net.noise_power + float(self.interference(row, n)[0])) / self.gain[n]
        hi = net.p_max
        for i in self.scenario.co_channel[n]:
            if self.lam[i] > 0:
                rest = float(self.interference(row, i, exclude=n)[0])
                cap = (powers[i] * self.gain[i] / theta - net.noise_power - rest) / self.gain[n]
                hi = min(hi, cap)
        return lo, hi

    def profile(self, powers: np.ndarray) -> StrategyProfile:
        out = []
        for n in range(self.scenario.num_users):
            lam = float(self.lam[n])
            out.append(Strategy(lam, float(powers[n]) if lam > 0 else 0.0,
                                float(self.cpu[n]) if lam < 1 else 0.0))
        return StrategyProfile(tuple(out))


def _line_minimize(fun, lo: float, hi: float, levels: int) -> tuple[float, float]:
    """Grid search on ``[lo, hi]`` followed by a bounded Brent polish."""
    grid = np.linspace(lo, hi, levels)
    values = fun(grid)
    k = int(np.argmin(values))
    best_x, best_v = float(grid[k]), float(values[k])
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, levels - 1)]
    if b > a:
        res = minimize_scalar(lambda x: float(fun(np.array([x]))[0]), bounds=(a, b),
                              method="bounded", options={"xatol": 1e-14 * hi})
        if res.fun < best_v:
            best_x, best_v = float(res.x), float(res.fun)
    return best_x, best_v


def _decision_slices(scenario: Scenario, disc: Discretization) -> Iterable[tuple[tuple, tuple]]:
    """Every (lambda, cpu) assignment; the guard fires before any is produced."""
    net = scenario.network
    per_user = []
    # nodes of the depth-first enumeration tree, root included
    count = level = 1
    for u in scenario.users:
        options = []
        cpus = disc.cpu_values(u, net)
        for lam in disc.lambda_levels:
            if lam < 1:
                options += [(lam, f) for f in cpus]
            else:
                options.append((lam, 0.0))
        per_user.append(options)
        level *= len(options)
        count += level
    if count > GUARD_NODES:
        raise EnumerationGuardError(
            f"{scenario.num_users} users need {count} enumeration nodes (limit {GUARD_NODES})")
    return ((tuple(c[0] for c in combo), tuple(c[1] for c in combo))
            for combo in itertools.product(*per_user))


def _seed_powers(space: _Space, seeds: Sequence[StrategyProfile]) -> list[np.ndarray]:
    out = []
    for seed in seeds:
        if np.array_equal(seed.lambdas, space.lam) and all(
                space.lam[n] == 1 or math.isclose(seed[n].cpu, space.cpu[n], rel_tol=1e-12)
                for n in range(len(seed))):
            out.append(seed.powers.astype(float))
    return out


def _starts(space: _Space, base: np.ndarray, count: int = 4) -> list[np.ndarray]:
    p_max = space.scenario.network.p_max
    top = p_max / max(base[space.off].max(), 1e-300)
    return [base * s for s in np.geomspace(1.0, top, count)]


# -- centralized optimum -----------------------------------------------------

def _descend(space: _Space, start: np.ndarray, levels: int, max_sweeps: int = 200) -> tuple[np.ndarray, float]:
    powers = start.copy()
    value = float(space.total(powers[None, :])[0])
    for _ in range(max_sweeps):
        before = value
        for n in space.off:
            lo, hi = space.joint_interval(powers, n)
            if hi < lo:
                continue

            def fun(grid, n=n):
                rows = np.repeat(powers[None, :], len(grid), axis=0)
                rows[:, n] = grid
                return space.total(rows)

            x, v = _line_minimize(fun, lo, hi, levels) if hi > lo else (lo, float(fun(np.array([lo]))[0]))
            if v < value:
                powers[n], value = x, v
        if before - value <= 1e-14 * abs(before):
            break
    return powers, value


def centralized_optimum(scenario: Scenario, disc: Discretization = Discretization(),
                        seeds: Sequence[StrategyProfile] = ()) -> tuple[StrategyProfile, float]:
    """Minimum of Σ_n U_n over the discretized, SINR-feasible strategy space.

    ``seeds`` (e.g. an equilibrium) are used as extra descent starts for the
    decision slice they belong to, so the result never exceeds their total.
    """
    best: tuple[float, StrategyProfile | None] = (math.inf, None)
    for lam, cpu in _decision_slices(scenario, disc):
        space = _Space(scenario, lam, cpu)
        zeros = np.zeros(scenario.num_users)
        if not space.off:
            total = float(space.total(zeros[None, :])[0])
            if total < best[0]:
                best = (total, space.profile(zeros))
            continue
        starts = _seed_powers(space, seeds)
        base = space.minimal_powers()
        if base is not None:
            starts += _starts(space, base)
        for start in starts:
            powers, total = _descend(space, start, disc.power_levels_per_user)
            if total < best[0]:
                best = (total, space.profile(powers))
    if best[1] is None:
        raise ValueError("no feasible profile in the discretized space")
    # report totals with the scalar reference evaluator so they compare exactly with seeds
    candidates = [best[1]]
    for seed in seeds:
        try:
            scenario.check_profile(seed, p_min_rtol=SINR_RTOL)
        except InfeasibleStrategyError:
            continue
        candidates.append(seed)
    totals = [math.fsum(all_utilities(scenario, c)) for c in candidates]
    k = int(np.argmin(totals))
    return candidates[k], totals[k]


# -- PoA ---------------------------------------------------------------------

def _cloud_overhead_at(user: UserParams, net: NetworkParams, power: float, interference: float) -> float:
    rate = net.channel_bandwidth * math.log2(1.0 + power * user.channel_gain / (net.noise_power + interference))
    t_trans = user.task.length_bits / rate
    return (user.weight_time * (t_trans + user.task.workload / net.server_cpu)
            + user.weight_energy * power * t_trans)


def _isolated_cloud_min(user: UserParams, net: NetworkParams) -> float:
    """Lowest cloud overhead the user could ever get: no interference, best power."""
    alone = Scenario((UserParams(0, 0, user.channel_gain, user.kappa, user.f_max,
                                 user.weight_time, user.weight_energy, user.task),),
                     NetworkParams(1, net.channel_bandwidth, net.noise_power, net.server_cpu,
                                   net.p_max, net.sinr_threshold, net.f_min_floor))
    start = StrategyProfile((Strategy(1.0, net.p_max, 0.0),))
    p_bar, _ = best_power(alone, start, 0, SolverConfig(multistart_count=256))
    grid = np.linspace(net.sinr_threshold * net.noise_power / user.channel_gain, net.p_max, 4097)
    values = [_cloud_overhead_at(user, net, p, 0.0) for p in np.append(grid, p_bar)]
    return min(values)


def poa_upper_bound(scenario: Scenario, ne_profile: StrategyProfile) -> float:
    """Ratio of a pessimistic equilibrium cost to an optimistic optimum cost.

    Numerator: every offloader's overhead with each of its interferers at the
    largest interferer power, every local user's overhead at the worse CPU
    endpoint, each counted once for itself and once per co-channel user whose
    utility includes it.  Denominator: for every user the cheaper of its
    interference-free best cloud overhead (weighted by the channel size, the
    number of utilities it would enter) and its best local overhead, which
    lower-bounds Σ U_n at any feasible profile.
    """
    net = scenario.network
    users = scenario.users
    pessimistic = []
    for n, (u, s) in enumerate(zip(users, ne_profile)):
        if s.lam > 0:
            others = interference_set(scenario, ne_profile, n)
            p_worst = max((ne_profile[j].power for j in others), default=0.0)
            gamma = sum(p_worst * users[j].channel_gain for j in others)
            cloud = _cloud_overhead_at(u, net, s.power, gamma)
            local = local_overhead(u, s.cpu) if s.lam < 1 else 0.0
            pessimistic.append(s.lam * cloud + (1 - s.lam) * local)
        else:
            pessimistic.append(max(local_overhead(u, net.f_min_floor), local_overhead(u, u.f_max)))
    numerator = math.fsum(
        pessimistic[n] + math.fsum(pessimistic[i] for i in interference_set(scenario, ne_profile, n))
        for n in range(scenario.num_users))

    optimistic = []
    for n, u in enumerate(users):
        local = local_overhead(u, best_cpu(u, net.f_min_floor))
        if net.sinr_threshold * net.noise_power / u.channel_gain <= net.p_max:
            cloud = (1 + len(scenario.co_channel[n])) * _isolated_cloud_min(u, net)
            optimistic.append(min(local, cloud))
        else:
            optimistic.append(local)
    return numerator / math.fsum(optimistic)


def price_of_anarchy(scenario: Scenario, ne_profile: StrategyProfile,
                     disc: Discretization = Discretization()) -> PoAReport:
    opt_profile, opt_total = centralized_optimum(scenario, disc, seeds=[ne_profile])
    ne_total = math.fsum(all_utilities(scenario, ne_profile))
    return PoAReport(
        ne_total=ne_total,
        opt_total=opt_total,
        poa=ne_total / opt_total,
        upper_bound=poa_upper_bound(scenario, ne_profile),
        opt_profile=opt_profile,
        ne_potential=potential(scenario, ne_profile),
        opt_potential=potential(scenario, opt_profile),
    )


def inverse_network_sinr(scenario: Scenario, profile: StrategyProfile) -> float:
    """``1 / Σ_n SINR_n`` over transmitting users; ``inf`` when nobody transmits."""
    total = math.fsum(sinr(scenario, profile, n) for n in range(scenario.num_users) if profile[n].lam > 0)
    return 1.0 / total if total > 0 else math.inf


# -- Pareto and NE oracles ----------------------------------------------------

def pareto_check(scenario: Scenario, profile: StrategyProfile,
                 disc: Discretization = Discretization()) -> tuple[bool, StrategyProfile | None]:
    """Search the grid for a profile that Pareto-dominates ``profile`` in U."""
    net = scenario.network
    reference = np.array(all_utilities(scenario, profile))
    slack = 1e-12 * np.maximum(1.0, np.abs(reference))
    levels = disc.power_levels_per_user
    static_grid = [np.linspace(min(net.sinr_threshold * net.noise_power / u.channel_gain, net.p_max),
                               net.p_max, levels) for u in scenario.users]
    # slices without any jointly SINR-feasible power vector contribute nothing
    slices = [(lam, cpu) for lam, cpu in _decision_slices(scenario, disc)
              if _Space(scenario, lam, cpu).minimal_powers() is not None]
    nodes = sum(levels ** sum(1 for v in lam if v > 0) for lam, _ in slices)
    if nodes > GUARD_NODES:
        raise EnumerationGuardError(f"Pareto search needs {nodes} grid profiles (limit {GUARD_NODES})")
    for lam, cpu in slices:
        space = _Space(scenario, lam, cpu)
        n_users = scenario.num_users
        if space.off:
            mesh = np.meshgrid(*[static_grid[n] for n in space.off], indexing="ij")
            powers = np.zeros((mesh[0].size, n_users))
            for axis, n in enumerate(space.off):
                powers[:, n] = mesh[axis].ravel()
            powers = powers[space.feasible(powers)]
            if powers.shape[0] == 0:
                continue
        else:
            powers = np.zeros((1, n_users))
        utils = space.utilities(powers)
        weakly = np.all(utils <= reference + slack, axis=1)
        strictly = np.any(utils < reference - slack, axis=1)
        hits = np.flatnonzero(weakly & strictly)
        if hits.size:
            return False, space.profile(powers[hits[0]])
    return True, None


def _power_equilibrium(space: _Space, start: np.ndarray, levels: int,
                       max_sweeps: int = 500) -> np.ndarray:
    """Cyclic per-user utility minimisation over powers with decisions fixed."""
    powers = start.copy()
    for _ in range(max_sweeps):
        moved = 0.0
        for n in space.off:
            lo, hi = space.joint_interval(powers, n)
            if lo > hi:
                return None

            def fun(grid, n=n):
                rows = np.repeat(powers[None, :], len(grid), axis=0)
                rows[:, n] = grid
                return space.utilities(rows)[:, n]

            x = _line_minimize(fun, lo, hi, levels)[0] if hi > lo else hi
            moved = max(moved, abs(x - powers[n]) / hi)
            powers[n] = x
        if moved <= 1e-13:
            break
    return powers


def _grid_stable(space: _Space, powers: np.ndarray, eps: float, dense: int) -> bool:
    """No single-user grid deviation improves that user's utility by more than eps."""
    scenario = space.scenario
    net = scenario.network
    # the SINR constraint is shared, so candidates and deviations stay jointly feasible
    if not space.feasible(powers[None, :])[0]:
        return False
    current = space.utilities(powers[None, :])[0]
    for n, u in enumerate(scenario.users):
        lam = space.lam.copy()
        cpu = space.cpu.copy()
        lam[n] = 0.0
        cpu[n] = best_cpu(u, net.f_min_floor)
        local = _Space(scenario, lam, cpu)
        rows = powers[None, :].copy()
        rows[0, n] = 0.0
        if local.utilities(rows)[0, n] < current[n] - eps:
            return False
        lam[n] = 1.0
        off = _Space(scenario, lam, cpu)
        lo, hi = off.joint_interval(powers, n)
        if lo <= hi:
            grid = np.linspace(lo, hi, dense)
            rows = np.repeat(powers[None, :], dense, axis=0)
            rows[:, n] = grid
            if off.utilities(rows)[:, n].min() < current[n] - eps:
                return False
    return True


def ne_oracle(scenario: Scenario, disc: Discretization = Discretization(),
              eps: float | None = None, dense: int = 4097) -> list[StrategyProfile]:
    """All ε-Nash profiles found by exhaustive decision enumeration.

    For each decision slice the offloaders' powers are driven to a mutual
    best response by cyclic grid-plus-Brent minimisation from several starts;
    each distinct fixed point is kept if no single-user deviation on a dense
    grid improves that user by more than ``eps`` (default ``1e-8 max(1, Φ)``).
    """
    found: list[StrategyProfile] = []
    seen: list[tuple[tuple, np.ndarray]] = []
    for lam, cpu in _decision_slices(scenario, disc):
        space = _Space(scenario, lam, cpu)
        n_users = scenario.num_users
        if space.off:
            net = scenario.network
            starts = [np.where(space.lam > 0, net.p_max, 0.0)]
            base = space.minimal_powers()
            if base is not None:
                starts += _starts(space, base, 3)
        else:
            starts = [np.zeros(n_users)]
        for start in starts:
            powers = _power_equilibrium(space, start, disc.power_levels_per_user) if space.off else start
            if powers is None:
                continue
            profile = space.profile(powers)
            tol = eps if eps is not None else 1e-8 * max(1.0, potential(scenario, profile))
            key = (lam, cpu)
            if any(k == key and np.allclose(p, powers, rtol=1e-9, atol=0) for k, p in seen):
                continue
            if _grid_stable(space, powers, tol, dense):
                seen.append((key, powers))
                found.append(profile)
    return found
