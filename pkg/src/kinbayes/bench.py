"""Acceptance-probability sweeps for the parallel rejection sampler.

For every grid value the swept rate is substituted into the base rate
vector and ``replicates`` intervals are sampled, once serially (fast mode,
one worker, i.e. plain sequential rejection sampling) and once per
requested worker count. Times are medians over ``timing_repeats`` runs
of the whole replicate set, measured with ``time.perf_counter``.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, InfeasibleIntervalError
from .network import ReactionNetwork
from .sampler import IntervalProblem, SamplerConfig, sample_interval


def amdahl_speedup(P: float, C: int) -> float:
    """Upper bound ``1 / (1 - P + P / C)`` on speedup with parallel fraction P on C cores."""
    if not 0.0 <= P <= 1.0:
        raise ContractError(f"parallel fraction must be in [0, 1], got {P}")
    if int(C) != C or C < 1:
        raise ContractError(f"core count must be a positive integer, got {C}")
    return 1.0 / (1.0 - P + P / C)


@dataclass(frozen=True, eq=False)
class SweepSpec:
    network: ReactionNetwork
    theta_base: tuple[float, ...]
    index: int
    values: tuple[float, ...]
    problem: IntervalProblem
    replicates: int = 20
    master_seed: int = 1
    mode: str = "fast"
    batch_size: int = 32
    max_attempts: int = 10**7
    timing_repeats: int = 5

    def __post_init__(self):
        if not self.values:
            raise ContractError("sweep grid must be non-empty")
        if any(not v > 0 for v in self.values):
            raise ContractError("sweep values must be positive")
        if not 0 <= self.index < len(self.theta_base):
            raise ContractError("swept parameter index out of range")
        if self.replicates < 1 or self.timing_repeats < 1:
            raise ContractError("replicates and timing_repeats must be >= 1")


@dataclass
class SweepRow:
    grid_value: float
    workers: int
    mean_attempts: float = float("nan")
    se_attempts: float = float("nan")
    mean_simulations: float = float("nan")
    mean_time: float = float("nan")
    serial_time: float = float("nan")
    efficiency: float = float("nan")
    parallel_fraction: float = float("nan")
    amdahl_bound: float = float("nan")
    error: str = ""
    attempts: list = field(default_factory=list, repr=False)


def _theta_at(spec, value):
    th = list(spec.theta_base)
    th[spec.index] = value
    return th


def _run_point(spec, theta, mode, workers):
    cfg = SamplerConfig(spec.batch_size, spec.max_attempts, mode, workers)
    segs = []
    times = []
    for _ in range(spec.timing_repeats):
        t = time.perf_counter()
        segs = [
            sample_interval(spec.network, theta, spec.problem, cfg, spec.master_seed, epoch)
            for epoch in range(spec.replicates)
        ]
        times.append(time.perf_counter() - t)
    return segs, float(np.median(times)) / spec.replicates


def _overhead_time(spec, theta, mode, workers):
    """Per-call cost of the sampler outside the attempt kernels (estimated on a 1-slot budget)."""
    cfg = SamplerConfig(1, 1, mode, workers)
    times = []
    for _ in range(spec.timing_repeats):
        t = time.perf_counter()
        for epoch in range(spec.replicates):
            try:
                sample_interval(spec.network, theta, spec.problem, cfg, spec.master_seed, epoch)
            except InfeasibleIntervalError:
                pass
        times.append(time.perf_counter() - t)
    one_attempt = float(np.median(times)) / spec.replicates
    return one_attempt


def run_sweep(spec: SweepSpec, worker_counts, cores: int | None = None) -> list[SweepRow]:
    """One row per (grid value, worker count); infeasible points are reported, not raised."""
    cores = cores or os.cpu_count() or 1
    rows = []
    for value in spec.values:
        theta = _theta_at(spec, value)
        try:
            serial_segs, serial_time = _run_point(spec, theta, "fast", 1)
        except InfeasibleIntervalError as exc:
            for w in worker_counts:
                rows.append(SweepRow(value, w, error=f"infeasible: {exc}"))
            continue
        serial_sims = np.mean([s.simulations for s in serial_segs])
        # parallel fraction: share of serial time spent beyond the fixed one-attempt call
        per_attempt_overhead = _overhead_time(spec, theta, "fast", 1)
        fixed = max(0.0, per_attempt_overhead - serial_time / max(serial_sims, 1.0))
        P = min(1.0, max(0.0, 1.0 - fixed / serial_time))
        for w in worker_counts:
            row = SweepRow(value, w, serial_time=serial_time, parallel_fraction=P)
            try:
                segs, t = _run_point(spec, theta, spec.mode, w)
            except InfeasibleIntervalError as exc:
                row.error = f"infeasible: {exc}"
                rows.append(row)
                continue
            att = np.array([s.attempts for s in segs], dtype=float)
            row.attempts = att.tolist()
            row.mean_attempts = float(att.mean())
            row.se_attempts = float(att.std(ddof=1) / math.sqrt(len(att))) if len(att) > 1 else 0.0
            row.mean_simulations = float(np.mean([s.simulations for s in segs]))
            row.mean_time = t
            row.efficiency = serial_time / t
            row.amdahl_bound = amdahl_speedup(P, min(w, cores))
            rows.append(row)
    return rows


def sweep_rows(rows) -> list[str]:
    """``grid_value,workers,mean_attempts,mean_time,efficiency`` lines."""
    out = ["grid_value,workers,mean_attempts,mean_time,efficiency"]
    for r in rows:
        if r.error:
            out.append(f"{r.grid_value!r},{r.workers},nan,nan,nan")
        else:
            out.append(f"{r.grid_value!r},{r.workers},{r.mean_attempts!r},{r.mean_time!r},{r.efficiency!r}")
    return out
