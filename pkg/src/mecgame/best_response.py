"""Per-user best responses: offload decision, CPU frequency and transmit power.

The CPU frequency has a closed form.  The transmit power minimises the
transmission part of the altruistic utility, whose stationary points are
located by bracketing sign changes of the analytic derivative on a uniform
grid and polishing each bracket with a safeguarded Newton iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .game import altruistic_utility
from .model import (
    DomainError,
    Scenario,
    Strategy,
    StrategyProfile,
    UserParams,
    interference_power,
)

__all__ = [
    "InfeasibleOffloadError",
    "SolverConfig",
    "BestResponseResult",
    "TransmissionObjective",
    "best_cpu",
    "min_power",
    "max_power",
    "transmission_utility",
    "best_power",
    "best_response",
    "safeguarded_newton",
]

LN2 = math.log(2.0)


class InfeasibleOffloadError(ValueError):
    """The SINR threshold cannot be met at ``p_max`` given current interference."""


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    newton_max_iter: int = 100
    multistart_count: int = 64
    tie_break_local: bool = True
    # acceptance threshold for a strategy change, relative to max(1, Φ)
    improvement_rtol: float = 1e-9
    # powers closer than this (relative) count as unchanged between rounds
    power_rtol: float = 1e-6

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be positive")
        if self.multistart_count < 3:
            raise ValueError("multistart_count must be at least 3")


@dataclass(frozen=True)
class BestResponseResult:
    strategy: Strategy
    utility_offload: float
    utility_local: float
    p_bar: float
    f_star: float
    stationary_points: tuple[float, ...] = field(default_factory=tuple)
    feasible_offload: bool = True


def best_cpu(user: UserParams, floor: float) -> float:
    """Minimiser of the local overhead over ``[floor, f_max]``."""
    if user.weight_energy == 0:
        return user.f_max
    if user.weight_time == 0:
        return min(floor, user.f_max)
    f = (user.weight_time / (2.0 * user.weight_energy * user.kappa)) ** (1.0 / 3.0)
    return min(max(f, floor), user.f_max)


def min_power(scenario: Scenario, profile: StrategyProfile, n: int) -> float:
    """Smallest power meeting the SINR threshold against the current interferers."""
    net = scenario.network
    gamma = interference_power(scenario, profile, n)
    return net.sinr_threshold * (net.noise_power + gamma) / scenario.users[n].channel_gain


def max_power(scenario: Scenario, profile: StrategyProfile, n: int, rtol: float = 1e-9) -> float:
    """Largest power that keeps every SINR-feasible co-channel offloader feasible.

    Co-channel offloaders already below the threshold impose no cap.
    """
    net = scenario.network
    users = scenario.users
    theta = net.sinr_threshold
    cap = net.p_max
    for i in scenario.co_channel[n]:
        s_i = profile[i]
        if s_i.lam <= 0 or s_i.power < min_power(scenario, profile, i) * (1 - rtol):
            continue
        rest = math.fsum(profile[j].power * users[j].channel_gain
                         for j in scenario.co_channel[i] if j != n and profile[j].lam > 0)
        room = s_i.power * users[i].channel_gain / theta - net.noise_power - rest
        cap = min(cap, room * (1 + rtol) / users[n].channel_gain)
    return cap


class TransmissionObjective:
    """Power-dependent part of ``U_n`` with user ``n`` offloading everything.

    ``value(p)`` differs from ``U_n((1, p, 0), s_{-n})`` by a constant.  The
    first term is the user's own transmission latency/energy, the second the
    transmission terms of every co-channel transmitter, each of which sees
    ``p * G_n`` as extra interference.
    """

    def __init__(self, scenario: Scenario, profile: StrategyProfile, n: int):
        net = scenario.network
        users = scenario.users
        me = users[n]
        scale = LN2 / net.channel_bandwidth
        self.gain = me.channel_gain
        self.own_a = me.task.length_bits * scale
        self.own_wt = me.weight_time
        self.own_we = me.weight_energy
        self.own_noise = net.noise_power + interference_power(scenario, profile, n)

        b, c, e = [], [], []
        for i in scenario.co_channel[n]:
            s_i = profile[i]
            if s_i.lam <= 0:
                continue
            u_i = users[i]
            b.append(s_i.lam * u_i.task.length_bits
                     * (u_i.weight_time + u_i.weight_energy * s_i.power) * scale)
            c.append(s_i.power * u_i.channel_gain)
            rest = math.fsum(profile[j].power * users[j].channel_gain
                             for j in scenario.co_channel[i]
                             if j != n and profile[j].lam > 0)
            e.append(net.noise_power + rest)
        self.nb_b = np.array(b)
        self.nb_c = np.array(c)
        self.nb_e = np.array(e)

    def value(self, p):
        arr = np.asarray(p, dtype=float)
        q = np.atleast_1d(arr)
        if np.any(q <= 0):
            raise DomainError("transmission utility needs p > 0")
        out = self.own_a * (self.own_wt + self.own_we * q) / np.log1p(q * self.gain / self.own_noise)
        if self.nb_b.size:
            m = np.log1p(self.nb_c[:, None] / (self.nb_e[:, None] + q[None, :] * self.gain))
            out = out + (self.nb_b[:, None] / m).sum(axis=0)
        return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)

    def derivatives(self, p):
        """First and second derivative with respect to ``p``."""
        arr = np.asarray(p, dtype=float)
        q = np.atleast_1d(arr)
        g = self.gain / self.own_noise
        x = q * g
        ell = np.log1p(x)
        d_ell = g / (1.0 + x)
        dd_ell = -d_ell * d_ell
        num = self.own_wt + self.own_we * q
        inner = self.own_we * ell - num * d_ell
        d1 = self.own_a * inner / ell**2
        d2 = self.own_a * (-num * dd_ell * ell - 2.0 * d_ell * inner) / ell**3
        if self.nb_b.size:
            b, c = self.nb_b[:, None], self.nb_c[:, None]
            z = self.nb_e[:, None] + q[None, :] * self.gain
            y = c / z
            dy = -y * self.gain / z
            ddy = 2.0 * c * self.gain**2 / z**3
            m = np.log1p(y)
            dm = dy / (1.0 + y)
            ddm = (ddy * (1.0 + y) - dy * dy) / (1.0 + y) ** 2
            d1 = d1 + (-b * dm / m**2).sum(axis=0)
            d2 = d2 + (b * (2.0 * dm * dm - m * ddm) / m**3).sum(axis=0)
        if arr.ndim == 0:
            return float(d1[0]), float(d2[0])
        return d1.reshape(arr.shape), d2.reshape(arr.shape)


def transmission_utility(scenario: Scenario, profile: StrategyProfile, n: int, p):
    return TransmissionObjective(scenario, profile, n).value(p)


def safeguarded_newton(fdf, lo: float, hi: float, tol: float, max_iter: int) -> float:
    """Root of ``f`` in a sign-change bracket ``[lo, hi]``.

    ``fdf(x)`` returns ``(f(x), f'(x))``.  Newton steps that would leave the
    bracket, or that do not at least halve the step, are replaced by bisection.
    """
    f_lo = fdf(lo)[0]
    f_hi = fdf(hi)[0]
    if f_lo == 0:
        return lo
    if f_hi == 0:
        return hi
    if f_lo * f_hi > 0:
        raise ValueError("root is not bracketed")
    x_neg, x_pos = (lo, hi) if f_lo < 0 else (hi, lo)
    x = 0.5 * (lo + hi)
    step_old = abs(hi - lo)
    step = step_old
    f, df = fdf(x)
    for _ in range(max_iter):
        if abs(f) <= tol:
            break
        newton_leaves = ((x - x_pos) * df - f) * ((x - x_neg) * df - f) > 0
        if newton_leaves or abs(2.0 * f) > abs(step_old * df):
            step_old = step
            step = 0.5 * (x_pos - x_neg)
            x = x_neg + step
        else:
            step_old = step
            step = f / df
            x = x - step
        if abs(step) <= 4.0 * np.finfo(float).eps * abs(x):
            break
        f, df = fdf(x)
        if f < 0:
            x_neg = x
        else:
            x_pos = x
    return float(x)


def best_power(scenario: Scenario, profile: StrategyProfile, n: int,
               cfg: SolverConfig = SolverConfig(), p_hi: float | None = None) -> tuple[float, list[float]]:
    """Utility-minimising power over ``[p_min, p_hi]`` and the stationary points found.

    ``p_hi`` defaults to ``p_max``.
    """
    p_lo = min_power(scenario, profile, n)
    if p_hi is None:
        p_hi = scenario.network.p_max
    if p_lo > p_hi:
        raise InfeasibleOffloadError(
            f"user {n}: SINR threshold needs {p_lo:.6g} W > upper limit {p_hi:.6g} W")
    obj = TransmissionObjective(scenario, profile, n)
    if p_hi - p_lo <= 1e-15 * p_hi:
        return p_hi, []

    grid = np.linspace(p_lo, p_hi, cfg.multistart_count)
    d1 = obj.derivatives(grid)[0]

    stationary = []
    for k in range(len(grid) - 1):
        if d1[k] == 0:
            stationary.append(float(grid[k]))
        elif d1[k] * d1[k + 1] < 0:
            stationary.append(safeguarded_newton(obj.derivatives, grid[k], grid[k + 1],
                                                 cfg.newton_tol, cfg.newton_max_iter))
    candidates = np.array([p_lo, p_hi] + stationary)
    values = obj.value(candidates)
    return float(candidates[int(np.argmin(values))]), stationary


def best_response(scenario: Scenario, profile: StrategyProfile, n: int,
                  cfg: SolverConfig = SolverConfig()) -> BestResponseResult:
    """Compare the best offloading and the best local strategy of user ``n``.

    Both candidates are scored with the full altruistic utility, so the
    co-channel users' overheads under each candidate are part of the choice.
    The SINR constraint is shared: the offloading power may not push a
    co-channel offloader that currently meets the threshold below it.
    Infeasible offloading degrades to local execution.
    """
    user = scenario.users[n]
    f_star = best_cpu(user, scenario.network.f_min_floor)
    local = Strategy(0.0, 0.0, f_star)
    u_local = altruistic_utility(scenario, profile.replace(n, local), n)
    try:
        p_bar, stationary = best_power(scenario, profile, n, cfg, max_power(scenario, profile, n))
    except InfeasibleOffloadError:
        return BestResponseResult(local, math.inf, u_local, 0.0, f_star, (), False)
    offload = Strategy(1.0, p_bar, 0.0)
    u_offload = altruistic_utility(scenario, profile.replace(n, offload), n)
    if u_offload < u_local or (u_offload == u_local and not cfg.tie_break_local):
        chosen = offload
    else:
        chosen = local
    return BestResponseResult(chosen, u_offload, u_local, p_bar, f_star, tuple(stationary), True)
