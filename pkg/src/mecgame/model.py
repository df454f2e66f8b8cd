"""Domain types and the per-user rate/overhead formulas.

Overheads are α-weighted sums of seconds and Joules and are treated as a
dimensionless score throughout the package.  Every function here is a pure
function of an immutable :class:`Scenario` and :class:`StrategyProfile`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "UndefinedRateError",
    "InfeasibleStrategyError",
    "Task",
    "UserParams",
    "NetworkParams",
    "Strategy",
    "StrategyProfile",
    "Scenario",
    "interference_set",
    "interference_power",
    "transmission_rate",
    "local_overhead",
    "cloud_overhead",
    "total_overhead",
    "all_overheads",
    "sinr",
    "batch_overheads",
]

WEIGHT_SUM_TOL = 1e-12


class DomainError(ValueError):
    """A formula was evaluated outside its domain (e.g. local share with f = 0)."""


class UndefinedRateError(DomainError):
    """A rate was requested for a user that does not transmit."""


class InfeasibleStrategyError(ValueError):
    """A strategy or profile violates the offloading feasibility constraints."""


@dataclass(frozen=True)
class Task:
    length_bits: float
    cycles_per_bit: float

    def __post_init__(self):
        if not (self.length_bits > 0 and math.isfinite(self.length_bits)):
            raise ValueError(f"length_bits must be positive and finite, got {self.length_bits}")
        if not (self.cycles_per_bit > 0 and math.isfinite(self.cycles_per_bit)):
            raise ValueError(f"cycles_per_bit must be positive and finite, got {self.cycles_per_bit}")
        if not math.isfinite(self.workload):
            raise ValueError("total workload length_bits * cycles_per_bit overflows")

    @property
    def workload(self) -> float:
        """Total CPU cycles needed for the whole task."""
        return self.length_bits * self.cycles_per_bit

    @classmethod
    def from_total_cycles(cls, length_bits: float, total_cycles: float) -> "Task":
        return cls(length_bits, total_cycles / length_bits)


@dataclass(frozen=True)
class UserParams:
    user_id: int
    channel: int
    channel_gain: float
    kappa: float
    f_max: float
    weight_time: float
    weight_energy: float
    task: Task

    def __post_init__(self):
        for name in ("channel_gain", "kappa", "f_max"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"user {self.user_id}: {name} must be positive, got {value}")
        for name in ("weight_time", "weight_energy"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"user {self.user_id}: {name} must lie in [0, 1], got {value}")
        if abs(self.weight_time + self.weight_energy - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"user {self.user_id}: weight_time + weight_energy must equal 1")
        if self.channel < 0:
            raise ValueError(f"user {self.user_id}: channel index must be non-negative")


@dataclass(frozen=True)
class NetworkParams:
    num_channels: int
    channel_bandwidth: float
    noise_power: float
    server_cpu: float
    p_max: float
    sinr_threshold: float
    f_min_floor: float = 1e6

    def __post_init__(self):
        for name in ("num_channels", "channel_bandwidth", "noise_power", "server_cpu",
                     "p_max", "sinr_threshold", "f_min_floor"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"network: {name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class Strategy:
    """One user's decision ``(lam, power, cpu)``.

    ``lam`` is the offloaded fraction of the input data, ``power`` the uplink
    transmit power in W and ``cpu`` the local CPU frequency in Hz.  Bounds that
    depend on the user (``f_max``) or on the other users (``p_min``) are
    checked by :meth:`Scenario.check_profile`.
    """

    lam: float
    power: float = 0.0
    cpu: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise InfeasibleStrategyError(f"offload ratio must lie in [0, 1], got {self.lam}")
        if self.power < 0 or self.cpu < 0:
            raise InfeasibleStrategyError("power and cpu must be non-negative")
        if self.lam == 0 and self.power != 0:
            raise InfeasibleStrategyError("a local-only user (lam = 0) must transmit at power 0")
        if self.lam > 0 and self.power <= 0:
            raise InfeasibleStrategyError("an offloading user (lam > 0) needs positive power")

    @property
    def offloads(self) -> bool:
        return self.lam > 0


@dataclass(frozen=True)
class StrategyProfile:
    strategies: tuple[Strategy, ...]

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))

    def __len__(self) -> int:
        return len(self.strategies)

    def __getitem__(self, n: int) -> Strategy:
        return self.strategies[n]

    def __iter__(self) -> Iterator[Strategy]:
        return iter(self.strategies)

    def replace(self, n: int, strategy: Strategy) -> "StrategyProfile":
        """Return the profile ``(strategy, s_{-n})``."""
        items = list(self.strategies)
        items[n] = strategy
        return StrategyProfile(tuple(items))

    def others(self, n: int) -> tuple[Strategy, ...]:
        return self.strategies[:n] + self.strategies[n + 1:]

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([s.lam for s in self.strategies])

    @property
    def powers(self) -> np.ndarray:
        return np.array([s.power for s in self.strategies])

    @property
    def cpus(self) -> np.ndarray:
        return np.array([s.cpu for s in self.strategies])

    @property
    def offloader_count(self) -> int:
        return sum(1 for s in self.strategies if s.lam == 1)


@dataclass(frozen=True)
class Scenario:
    """The static part of the game: users plus shared network constants."""

    users: tuple[UserParams, ...]
    network: NetworkParams

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(self.users))
        if not self.users:
            raise ValueError("a scenario needs at least one user")
        for n, u in enumerate(self.users):
            if u.user_id != n:
                raise ValueError(f"user at position {n} has user_id {u.user_id}")
            if u.channel >= self.network.num_channels:
                raise ValueError(
                    f"user {n}: channel {u.channel} out of range for K={self.network.num_channels}")

    @property
    def num_users(self) -> int:
        return len(self.users)

    @cached_property
    def co_channel(self) -> tuple[tuple[int, ...], ...]:
        """For each user, the other users sharing its channel."""
        by_channel: dict[int, list[int]] = {}
        for u in self.users:
            by_channel.setdefault(u.channel, []).append(u.user_id)
        return tuple(tuple(i for i in by_channel[u.channel] if i != u.user_id) for u in self.users)

    def check_profile(self, profile: StrategyProfile, p_min_rtol: float | None = None) -> None:
        """Raise :class:`InfeasibleStrategyError` if ``profile`` breaks a bound.

        ``p_min_rtol`` additionally enforces the SINR threshold for every
        offloading user with that relative slack.
        """
        if len(profile) != self.num_users:
            raise InfeasibleStrategyError(
                f"profile has {len(profile)} strategies for {self.num_users} users")
        p_max = self.network.p_max
        for n, (u, s) in enumerate(zip(self.users, profile)):
            if s.cpu > u.f_max * (1 + 1e-12):
                raise InfeasibleStrategyError(f"user {n}: cpu {s.cpu} exceeds f_max {u.f_max}")
            if s.power > p_max * (1 + 1e-12):
                raise InfeasibleStrategyError(f"user {n}: power {s.power} exceeds p_max {p_max}")
            if p_min_rtol is not None and s.offloads:
                p_min = self.network.sinr_threshold * (
                    self.network.noise_power + interference_power(self, profile, n)) / u.channel_gain
                if s.power < p_min * (1 - p_min_rtol):
                    raise InfeasibleStrategyError(
                        f"user {n}: power {s.power} below SINR-threshold minimum {p_min}")


def interference_set(scenario: Scenario, profile: StrategyProfile, n: int) -> frozenset[int]:
    """Co-channel users other than ``n`` that currently transmit."""
    return frozenset(i for i in scenario.co_channel[n] if profile[i].lam > 0)


def interference_power(scenario: Scenario, profile: StrategyProfile, n: int) -> float:
    """Received interference power at the server on user ``n``'s channel, in W."""
    users = scenario.users
    return math.fsum(profile[i].power * users[i].channel_gain
                     for i in scenario.co_channel[n] if profile[i].lam > 0)


def sinr(scenario: Scenario, profile: StrategyProfile, n: int) -> float:
    u = scenario.users[n]
    return profile[n].power * u.channel_gain / (
        scenario.network.noise_power + interference_power(scenario, profile, n))


def transmission_rate(scenario: Scenario, profile: StrategyProfile, n: int) -> float:
    """Uplink Shannon rate of user ``n`` in bits/s."""
    s = profile[n]
    if s.lam <= 0 or s.power <= 0:
        raise UndefinedRateError(f"user {n} does not transmit (lam={s.lam}, power={s.power})")
    return scenario.network.channel_bandwidth * math.log2(1.0 + sinr(scenario, profile, n))


def local_overhead(user: UserParams, f: float) -> float:
    """Weighted latency + energy of running the whole task locally at frequency ``f``."""
    if not f > 0:
        raise DomainError(f"local execution needs a positive CPU frequency, got {f}")
    w = user.task.workload
    return user.weight_time * w / f + user.weight_energy * user.kappa * w * f * f


def _cloud_parts(scenario: Scenario, profile: StrategyProfile, n: int) -> tuple[float, float]:
    u = scenario.users[n]
    s = profile[n]
    r = transmission_rate(scenario, profile, n)
    t_trans = u.task.length_bits / r
    time = t_trans + u.task.workload / scenario.network.server_cpu
    energy = s.power * t_trans
    return time, energy


def cloud_overhead(scenario: Scenario, profile: StrategyProfile, n: int) -> float:
    """Weighted overhead of offloading the whole task at the profile's power."""
    u = scenario.users[n]
    time, energy = _cloud_parts(scenario, profile, n)
    return u.weight_time * time + u.weight_energy * energy


def total_overhead(scenario: Scenario, profile: StrategyProfile, n: int) -> float:
    """Overhead of user ``n`` for any offload ratio.

    Transmission terms are exactly 0 when ``lam == 0`` and local terms are
    exactly 0 when ``lam == 1``; neither is evaluated in that case.
    """
    u = scenario.users[n]
    s = profile[n]
    time = 0.0
    energy = 0.0
    if s.lam > 0:
        if s.power <= 0:
            raise DomainError(f"user {n}: offloaded share needs positive power")
        c_time, c_energy = _cloud_parts(scenario, profile, n)
        time += s.lam * c_time
        energy += s.lam * c_energy
    if s.lam < 1:
        if s.cpu <= 0:
            raise DomainError(f"user {n}: local share needs positive CPU frequency")
        w = u.task.workload
        time += (1 - s.lam) * w / s.cpu
        energy += (1 - s.lam) * u.kappa * w * s.cpu * s.cpu
    return u.weight_time * time + u.weight_energy * energy


def all_overheads(scenario: Scenario, profile: StrategyProfile) -> list[float]:
    return [total_overhead(scenario, profile, n) for n in range(scenario.num_users)]


def batch_overheads(scenario: Scenario, lam: Sequence[float], power: np.ndarray,
                    cpu: Sequence[float]) -> np.ndarray:
    """Overheads of every user for many power vectors at once.

    ``lam`` and ``cpu`` are fixed per user; ``power`` has shape ``(M, N)``.
    Returns an ``(M, N)`` array.  Used by the enumeration oracles; the scalar
    functions above are the reference path.
    """
    users = scenario.users
    net = scenario.network
    lam = np.asarray(lam, dtype=float)
    cpu = np.asarray(cpu, dtype=float)
    power = np.atleast_2d(np.asarray(power, dtype=float))
    gain = np.array([u.channel_gain for u in users])
    bits = np.array([u.task.length_bits for u in users])
    work = np.array([u.task.workload for u in users])
    wt = np.array([u.weight_time for u in users])
    we = np.array([u.weight_energy for u in users])
    kappa = np.array([u.kappa for u in users])

    rx = np.where(lam > 0, 1.0, 0.0) * power * gain
    out = np.zeros_like(power)
    for n in range(len(users)):
        time = np.zeros(power.shape[0])
        energy = np.zeros(power.shape[0])
        if lam[n] > 0:
            others = list(scenario.co_channel[n])
            gamma = rx[:, others].sum(axis=1) if others else 0.0
            rate = net.channel_bandwidth * np.log2(1.0 + power[:, n] * gain[n] / (net.noise_power + gamma))
            t_trans = bits[n] / rate
            time = time + lam[n] * (t_trans + work[n] / net.server_cpu)
            energy = energy + lam[n] * power[:, n] * t_trans
        if lam[n] < 1:
            time = time + (1 - lam[n]) * work[n] / cpu[n]
            energy = energy + (1 - lam[n]) * kappa[n] * work[n] * cpu[n] ** 2
        out[:, n] = wt[n] * time + we[n] * energy
    return out
