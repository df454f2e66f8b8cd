"""Scenario files and random scenario generation.

A scenario file is JSON with a ``network`` object and either an explicit
``users`` list or a ``generator`` block.  All quantities are SI: W, Hz,
bits, meters.  ``sinr_threshold`` is a linear ratio and has no default.

Example::

    {
      "schema_version": 1,
      "network": {"num_channels": 10, "sinr_threshold": 1.0},
      "generator": {"num_users": 12, "cell_radius": 200.0, "seed": 7}
    }
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Literal, Optional, Union

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    model_validator,
)

from .model import NetworkParams, Scenario, Task, UserParams

__all__ = [
    "SCHEMA_VERSION",
    "SpecError",
    "TaskSpec",
    "UserSpec",
    "NetworkSpec",
    "GeneratorSpec",
    "ScenarioSpec",
    "parse_spec",
    "load_spec",
    "spec_hash",
    "generate",
    "build_scenario",
    "scenario_to_spec",
    "path_gain",
]

SCHEMA_VERSION = 1
WEIGHT_PRESETS = (1.0, 0.5, 0.0)


class SpecError(ValueError):
    """A scenario file failed to parse or validate; the message names the field."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class TaskSpec(_Strict):
    length_bits: PositiveFloat
    cycles_per_bit: Optional[PositiveFloat] = None
    total_cycles: Optional[PositiveFloat] = None

    @model_validator(mode="after")
    def _one_workload(self):
        if (self.cycles_per_bit is None) == (self.total_cycles is None):
            raise ValueError("give exactly one of cycles_per_bit or total_cycles")
        return self

    def to_task(self) -> Task:
        if self.cycles_per_bit is not None:
            return Task(self.length_bits, self.cycles_per_bit)
        return Task.from_total_cycles(self.length_bits, self.total_cycles)


class UserSpec(_Strict):
    channel: NonNegativeInt
    channel_gain: PositiveFloat
    kappa: PositiveFloat = 1e-27
    f_max: PositiveFloat = 1e9
    weight_time: float = Field(0.5, ge=0.0, le=1.0)
    weight_energy: Optional[float] = Field(None, ge=0.0, le=1.0)
    task: TaskSpec

    @model_validator(mode="after")
    def _weights_sum(self):
        if self.weight_energy is not None and abs(self.weight_time + self.weight_energy - 1.0) > 1e-12:
            raise ValueError("weight_time + weight_energy must equal 1")
        return self


class NetworkSpec(_Strict):
    num_channels: PositiveInt = 10
    total_bandwidth: PositiveFloat = 2e7
    channel_bandwidth: Optional[PositiveFloat] = None
    noise_power: PositiveFloat = 1e-13
    server_cpu: PositiveFloat = 1e10
    p_max: PositiveFloat = 0.15
    sinr_threshold: PositiveFloat
    f_min_floor: PositiveFloat = 1e6

    def to_params(self) -> NetworkParams:
        width = self.channel_bandwidth or self.total_bandwidth / self.num_channels
        return NetworkParams(self.num_channels, width, self.noise_power, self.server_cpu,
                             self.p_max, self.sinr_threshold, self.f_min_floor)


class GeneratorSpec(_Strict):
    num_users: int = Field(ge=1, le=64)
    cell_radius: PositiveFloat = 200.0
    min_distance: PositiveFloat = 10.0
    path_loss_exponent: PositiveFloat = 4.0
    seed: int = 0
    task_bits: PositiveFloat = 5e6
    cycles_per_bit: Optional[PositiveFloat] = None
    total_cycles: Optional[PositiveFloat] = None
    weight_time: Union[Literal["mixed"], float] = 0.5
    kappa: PositiveFloat = 1e-27
    f_max: PositiveFloat = 1e9
    channel_assignment: Literal["round_robin", "uniform"] = "round_robin"

    @model_validator(mode="after")
    def _check(self):
        if self.min_distance >= self.cell_radius:
            raise ValueError("min_distance must be smaller than cell_radius")
        if self.cycles_per_bit is not None and self.total_cycles is not None:
            raise ValueError("give at most one of cycles_per_bit or total_cycles")
        if self.weight_time != "mixed" and self.weight_time not in WEIGHT_PRESETS:
            raise ValueError(f"weight_time must be one of {WEIGHT_PRESETS} or 'mixed'")
        return self

    def task(self) -> Task:
        if self.total_cycles is not None:
            return Task.from_total_cycles(self.task_bits, self.total_cycles)
        # 1000 Megacycles for a 5000 Kb task
        return Task(self.task_bits, self.cycles_per_bit if self.cycles_per_bit is not None else 200.0)


class ScenarioSpec(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    network: NetworkSpec
    users: Optional[list[UserSpec]] = None
    generator: Optional[GeneratorSpec] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.users is None) == (self.generator is None):
            raise ValueError("give exactly one of 'users' or 'generator'")
        if self.users is not None:
            if not self.users:
                raise ValueError("'users' must not be empty")
            for n, u in enumerate(self.users):
                if u.channel >= self.network.num_channels:
                    raise ValueError(f"users[{n}].channel {u.channel} >= num_channels")
        return self


def _describe(err: ValidationError) -> str:
    parts = []
    for item in err.errors():
        loc = ".".join(str(x) for x in item["loc"]) or "<root>"
        parts.append(f"{loc}: {item['msg']}")
    return "; ".join(parts)


def parse_spec(data: dict[str, Any]) -> ScenarioSpec:
    try:
        return ScenarioSpec.model_validate(data)
    except ValidationError as err:
        raise SpecError(_describe(err)) from None


def load_spec(path: str | Path) -> ScenarioSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise SpecError(f"{path}: {err.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise SpecError(f"{path}: line {err.lineno} column {err.colno}: {err.msg}") from None
    if not isinstance(data, dict):
        raise SpecError(f"{path}: top level must be a JSON object")
    try:
        return parse_spec(data)
    except SpecError as err:
        raise SpecError(f"{path}: {err}") from None


def spec_hash(spec: ScenarioSpec) -> str:
    canonical = json.dumps(spec.model_dump(mode="json", exclude_none=True), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def path_gain(distance: float, exponent: float) -> float:
    return distance ** (-exponent)


def generate(spec: ScenarioSpec, seed: int | None = None) -> Scenario:
    """Drop users uniformly in the annulus ``[min_distance, cell_radius]``.

    The same spec and seed always produce the same scenario.
    """
    gen = spec.generator
    if gen is None:
        raise SpecError("generator: spec has explicit users, nothing to generate")
    rng = np.random.default_rng(gen.seed if seed is None else seed)
    n_users = gen.num_users
    k = spec.network.num_channels
    inner = (gen.min_distance / gen.cell_radius) ** 2
    radius = gen.cell_radius * np.sqrt(rng.uniform(inner, 1.0, n_users))
    if gen.channel_assignment == "round_robin":
        channels = [n % k for n in range(n_users)]
    else:
        channels = rng.integers(0, k, n_users).tolist()
    if gen.weight_time == "mixed":
        weights = rng.choice(np.array(WEIGHT_PRESETS), n_users).tolist()
    else:
        weights = [float(gen.weight_time)] * n_users
    task = gen.task()
    users = tuple(
        UserParams(n, int(channels[n]), path_gain(float(radius[n]), gen.path_loss_exponent),
                   gen.kappa, gen.f_max, weights[n], 1.0 - weights[n], task)
        for n in range(n_users))
    return Scenario(users, spec.network.to_params())


def build_scenario(spec: ScenarioSpec, seed: int | None = None) -> Scenario:
    if spec.generator is not None:
        return generate(spec, seed)
    users = []
    for n, u in enumerate(spec.users):
        wt = u.weight_time
        we = u.weight_energy if u.weight_energy is not None else 1.0 - wt
        users.append(UserParams(n, u.channel, u.channel_gain, u.kappa, u.f_max, wt, we, u.task.to_task()))
    try:
        return Scenario(tuple(users), spec.network.to_params())
    except ValueError as err:
        raise SpecError(str(err)) from None


def scenario_to_spec(scenario: Scenario) -> ScenarioSpec:
    """Explicit-users spec reproducing ``scenario`` exactly."""
    net = scenario.network
    network = NetworkSpec(num_channels=net.num_channels,
                          total_bandwidth=net.channel_bandwidth * net.num_channels,
                          channel_bandwidth=net.channel_bandwidth, noise_power=net.noise_power,
                          server_cpu=net.server_cpu, p_max=net.p_max,
                          sinr_threshold=net.sinr_threshold, f_min_floor=net.f_min_floor)
    users = [UserSpec(channel=u.channel, channel_gain=u.channel_gain, kappa=u.kappa, f_max=u.f_max,
                      weight_time=u.weight_time, weight_energy=u.weight_energy,
                      task=TaskSpec(length_bits=u.task.length_bits, cycles_per_bit=u.task.cycles_per_bit))
             for u in scenario.users]
    return ScenarioSpec(network=network, users=users)
