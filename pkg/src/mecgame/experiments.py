"""Experiment drivers behind the CLI: simulate, sweep and analyze.

Every output file starts with ``#`` comment lines carrying the tool
version, file schema, seed and the SHA-256 of the canonical scenario spec,
followed by a CSV header row (or a JSON object for reports).  Floats are
written with ``repr`` so files are byte-stable for fixed inputs.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import __version__
from .analysis import Discretization, PoAReport, pareto_check, price_of_anarchy
from .best_response import SolverConfig, best_response
from .dynamics import IterationTrace, UpdateSchedule, improvement_tol, run
from .game import is_nash, potential
from .model import Scenario, Strategy, StrategyProfile
from .scenario import ScenarioSpec, SpecError, build_scenario, spec_hash

__all__ = [
    "OUTPUT_SCHEMA",
    "TRACE_COLUMNS",
    "SUMMARY_COLUMNS",
    "AGGREGATE_COLUMNS",
    "SimulationResult",
    "simulate",
    "sweep",
    "analyze",
    "read_final_profile",
    "best_response_candidates",
    "effective_seed",
]

log = logging.getLogger(__name__)

OUTPUT_SCHEMA = 1
TRACE_COLUMNS = ("round", "user_id", "lambda", "power_w", "cpu_hz", "overhead", "utility")
SUMMARY_COLUMNS = ("round", "potential", "offloader_count")
AGGREGATE_COLUMNS = ("grid_value", "seed", "offloader_count_final", "network_overhead_final",
                     "rounds_to_converge", "status")


def effective_seed(spec: ScenarioSpec, seed: int | None) -> int | None:
    """The placement seed actually used: the override, else the generator's own."""
    if seed is not None:
        return seed
    return spec.generator.seed if spec.generator is not None else None


def _header(seed: int | None, digest: str) -> str:
    return (f"# mecgame {__version__}\n# schema {OUTPUT_SCHEMA}\n"
            f"# seed {seed if seed is not None else 'none'}\n# spec_sha256 {digest}\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: str, columns: Sequence[str], rows) -> None:
    buf = io.StringIO()
    buf.write(header)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


@dataclass(frozen=True)
class SimulationResult:
    scenario: Scenario
    trace: IterationTrace
    trace_path: Path
    summary_path: Path

    @property
    def converged(self) -> bool:
        return self.trace.converged


def best_response_candidates(scenario: Scenario, profile: StrategyProfile,
                             cfg: SolverConfig = SolverConfig()) -> list[list[Strategy]]:
    """Per-user deviation sets: current strategy, best response, and the
    best strategy on the other side of the offload decision."""
    out = []
    for n in range(scenario.num_users):
        br = best_response(scenario, profile, n, cfg)
        cands = [profile[n], br.strategy, Strategy(0.0, 0.0, br.f_star)]
        if br.feasible_offload:
            cands.append(Strategy(1.0, br.p_bar, 0.0))
        out.append(cands)
    return out


def simulate(spec: ScenarioSpec, out_dir: str | Path, schedule: UpdateSchedule = UpdateSchedule(),
             seed: int | None = None, max_rounds: int = 500,
             cfg: SolverConfig = SolverConfig()) -> SimulationResult:
    """Run the dynamics on one scenario and write ``trace.csv``/``summary.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenario = build_scenario(spec, seed)
    trace = run(scenario, schedule, cfg, max_rounds)
    header = _header(effective_seed(spec, seed), spec_hash(spec))
    trace_rows = []
    summary_rows = []
    for snap in trace.rounds:
        for n, s in enumerate(snap.profile):
            trace_rows.append((snap.round, n, float(s.lam), float(s.power), float(s.cpu),
                               snap.overheads[n], snap.utilities[n]))
        summary_rows.append((snap.round, snap.potential, snap.offloader_count))
    trace_path = out / "trace.csv"
    summary_path = out / "summary.csv"
    _write_csv(trace_path, header, TRACE_COLUMNS, trace_rows)
    _write_csv(summary_path, header, SUMMARY_COLUMNS, summary_rows)
    return SimulationResult(scenario, trace, trace_path, summary_path)


def _with_grid_value(spec: ScenarioSpec, variable: str, value) -> ScenarioSpec:
    if spec.generator is None:
        raise SpecError("sweep: template needs a 'generator' block")
    field = {"N": "num_users", "num_users": "num_users", "task_bits": "task_bits"}.get(variable)
    if field is None:
        raise SpecError(f"sweep: cannot vary '{variable}' (use N or task_bits)")
    data = spec.model_dump(mode="json", exclude_none=True)
    data["generator"][field] = value
    return ScenarioSpec.model_validate(data)


def _sweep_cell(args):
    spec, variable, value, seed, out_dir, kind, max_rounds = args
    cell_dir = Path(out_dir) / "cells" / f"{variable}={value}" / f"seed={seed}"
    try:
        cell_spec = _with_grid_value(spec, variable, value)
        result = simulate(cell_spec, cell_dir, UpdateSchedule(kind, seed), seed, max_rounds)
    except Exception as err:  # recorded per cell; the sweep carries on
        log.warning("sweep cell %s=%s seed=%s failed: %s", variable, value, seed, err)
        return (value, seed, "", "", "", f"error: {err}")
    final = result.trace.final
    status = "converged" if result.converged else "max_rounds"
    return (value, seed, final.offloader_count, final.potential, result.trace.rounds_to_converge, status)


def sweep(template: ScenarioSpec, variable: str, values: Sequence, seeds: Sequence[int],
          out_dir: str | Path, schedule_kind: str = "random_permutation", max_rounds: int = 500,
          jobs: int = 1) -> Path:
    """Simulate every (grid value, seed) cell and write ``aggregate.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = [(template, variable, v, s, str(out), schedule_kind, max_rounds) for v in values for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]
    path = out / "aggregate.csv"
    header = _header(None, spec_hash(template)) + f"# vary {variable}\n"
    _write_csv(path, header, AGGREGATE_COLUMNS, rows)
    return path


def read_final_profile(trace_path: str | Path, num_users: int) -> StrategyProfile:
    """Profile of the last round recorded in a trace file."""
    path = Path(trace_path)
    try:
        lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    except OSError as err:
        raise SpecError(f"{path}: {err.strerror}") from None
    reader = csv.DictReader(lines)
    if reader.fieldnames is None or tuple(reader.fieldnames) != TRACE_COLUMNS:
        raise SpecError(f"{path}: expected columns {','.join(TRACE_COLUMNS)}")
    rows = list(reader)
    if not rows:
        raise SpecError(f"{path}: trace has no rows")
    last = max(int(r["round"]) for r in rows)
    final = sorted((r for r in rows if int(r["round"]) == last), key=lambda r: int(r["user_id"]))
    if len(final) != num_users:
        raise SpecError(f"{path}: round {last} has {len(final)} rows for {num_users} users")
    try:
        return StrategyProfile(tuple(Strategy(float(r["lambda"]), float(r["power_w"]), float(r["cpu_hz"]))
                                     for r in final))
    except ValueError as err:
        raise SpecError(f"{path}: round {last}: {err}") from None


def _profile_json(profile: StrategyProfile) -> list[dict]:
    return [{"user_id": n, "lambda": s.lam, "power_w": s.power, "cpu_hz": s.cpu}
            for n, s in enumerate(profile)]


def analyze(spec: ScenarioSpec, trace_path: str | Path, out_dir: str | Path,
            seed: int | None = None, disc: Discretization = Discretization()) -> tuple[Path, PoAReport]:
    """PoA, bound and Pareto verdict for a converged trace; writes ``analysis.json``.

    Raises :class:`EnumerationGuardError` before writing anything when the
    instance is too large.
    """
    scenario = build_scenario(spec, seed)
    ne = read_final_profile(trace_path, scenario.num_users)
    cfg = SolverConfig()
    cert = is_nash(scenario, ne, best_response_candidates(scenario, ne, cfg),
                   10 * improvement_tol(scenario, ne, cfg))
    report = price_of_anarchy(scenario, ne, disc)
    is_pareto, dominator = pareto_check(scenario, ne, disc)
    doc = {
        "tool_version": __version__,
        "schema": OUTPUT_SCHEMA,
        "seed": effective_seed(spec, seed),
        "spec_sha256": spec_hash(spec),
        "is_nash": bool(cert),
        "poa": report.poa,
        "upper_bound": report.upper_bound,
        "potential_ratio": report.potential_ratio,
        "ne_total": report.ne_total,
        "opt_total": report.opt_total,
        "ne_potential": potential(scenario, ne),
        "pareto_efficient": is_pareto,
        "dominator": _profile_json(dominator) if dominator is not None else None,
        "opt_profile": _profile_json(report.opt_profile),
    }
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "analysis.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n", encoding="utf-8")
    return path, report
