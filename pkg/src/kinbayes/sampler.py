"""Endpoint-conditioned rejection sampling over a worker pool.

Attempt ``k`` of an interval (its *slot*) always uses the stream
``stream_id_for(DOMAIN_ATTEMPT, epoch, k)`` from counter 0, and batch ``b``
holds slots ``b*B .. b*B+B-1``. Stream assignment is therefore positional
and never depends on scheduling.

deterministic
    Every slot of a batch runs; the first batch with a success ends the
    search and one of its successes is chosen uniformly with the selection
    stream of that batch. Output is identical for any worker count.
fast
    Workers pull slots in increasing order from a shared counter and stop
    pulling once any success is flagged. Pulled slots always run to
    completion; one completed success is chosen uniformly.

In both modes ``attempts`` is the serial-equivalent count, one plus the
position of the lowest accepted slot, which is Geometric(p); slots below
it always run. ``simulations`` counts attempts actually executed.
"""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import rng
from .errors import ContractError, InfeasibleIntervalError, ReplayMismatchError
from .network import ReactionNetwork, check_theta
from .ssa import (
    DEFAULT_MAX_EVENTS,
    STATUS_OK,
    STATUS_UNREACHABLE,
    SufficientStats,
    Trajectory,
    kernel_arrays,
    raise_for_status,
    run_kernel,
    ssa_kernel,
)

MODES = ("deterministic", "fast")
DEFAULT_BATCH_SIZE = 32
DEFAULT_MAX_ATTEMPTS = 10**7


@dataclass(frozen=True)
class SamplerConfig:
    """Rejection-sampler settings.

    ``batch_size`` defaults to a fixed 32 rather than a multiple of the
    worker count so that deterministic output does not change with
    ``worker_count``.
    """

    batch_size: int = DEFAULT_BATCH_SIZE
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    mode: str = "deterministic"
    worker_count: int = 1
    max_events: int = DEFAULT_MAX_EVENTS

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractError(f"sampler mode must be one of {MODES}, got {self.mode!r}")
        if self.batch_size < 1 or self.worker_count < 1 or self.max_events < 1:
            raise ContractError("batch_size, worker_count and max_events must be >= 1")
        if self.max_attempts < self.batch_size:
            raise ContractError("max_attempts must be >= batch_size")


@dataclass(frozen=True, eq=False)
class IntervalProblem:
    start_state: tuple[int, ...]
    end_state: tuple[int, ...]
    t_start: float
    t_end: float

    def __post_init__(self):
        object.__setattr__(self, "start_state", tuple(int(c) for c in self.start_state))
        object.__setattr__(self, "end_state", tuple(int(c) for c in self.end_state))
        if not self.t_end > self.t_start:
            raise ContractError(f"interval needs t_end > t_start, got [{self.t_start}, {self.t_end}]")

    def validate(self, network: ReactionNetwork) -> IntervalProblem:
        network.check_state(self.start_state)
        network.check_state(self.end_state)
        return self

    def feasible_by_laws(self, network: ReactionNetwork) -> bool:
        return network.law_values(self.start_state) == network.law_values(self.end_state)


@dataclass(frozen=True, eq=False)
class AcceptedSegment:
    initial_stream_state: rng.StreamState
    stats: SufficientStats
    attempts: int
    simulations: int = field(default=0, compare=False)

    def __eq__(self, other):
        if not isinstance(other, AcceptedSegment):
            return NotImplemented
        return (
            self.initial_stream_state == other.initial_stream_state
            and self.stats == other.stats
            and self.attempts == other.attempts
        )


@njit(cache=True, nogil=True)
def attempt_slots(
    x_start, x_end, ptr, idx, mult, stoich, monotone, theta, t0, t1, seed, sid_base,
    slot_lo, n_slots, max_events, accepted, r_out, b_out,
):
    """Run slots ``slot_lo .. slot_lo+n_slots-1``; results land at the same offsets."""
    m = theta.shape[0]
    n = x_start.shape[0]
    x = np.empty(n, dtype=np.int64)
    ev_t = np.empty(0)
    ev_j = np.empty(0, dtype=np.int64)
    for k in range(n_slots):
        for i in range(n):
            x[i] = x_start[i]
        sid = sid_base | np.uint64(slot_lo + k)
        status, _, _ = ssa_kernel(
            x, ptr, idx, mult, stoich, theta, t0, t1, seed, sid, np.uint64(0),
            max_events, r_out[k], b_out[k], ev_t, ev_j, False, x_end, monotone,
        )
        if status == 4:
            accepted[k] = 0
            continue
        if status != 0:
            return status
        ok = 1
        for i in range(n):
            if x[i] != x_end[i]:
                ok = 0
                break
        accepted[k] = ok
    return 0


@njit(cache=True, nogil=True)
def run_batches(
    x_start, x_end, ptr, idx, mult, stoich, monotone, theta, t0, t1, seed, sid_base,
    batch_size, max_attempts, max_events, accepted, r_out, b_out,
):
    """Serial deterministic search. Returns ``(batch, n_slots, status)``; batch -1 means exhausted."""
    bidx = 0
    while True:
        lo = bidx * batch_size
        if lo >= max_attempts:
            return -1, 0, 0
        n = min(batch_size, max_attempts - lo)
        status = attempt_slots(
            x_start, x_end, ptr, idx, mult, stoich, monotone, theta, t0, t1, seed, sid_base,
            lo, n, max_events, accepted, r_out, b_out,
        )
        if status != 0:
            return bidx, n, status
        for k in range(n):
            if accepted[k]:
                return bidx, n, 0
        bidx += 1


class _Pool:
    """Lazily created thread pools shared per worker count."""

    _pools: dict = {}
    _lock = threading.Lock()

    @classmethod
    def get(cls, workers: int) -> ThreadPoolExecutor:
        with cls._lock:
            pool = cls._pools.get(workers)
            if pool is None:
                pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="kinbayes")
                cls._pools[workers] = pool
            return pool


def _split(n, parts):
    bounds = np.linspace(0, n, min(parts, n) + 1).astype(int)
    return [(int(lo), int(hi - lo)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


class _Context:
    """Arrays shared by all attempts of one interval."""

    def __init__(self, network, theta, problem, config, master_seed, epoch):
        self.network = network
        self.theta = check_theta(theta, network.n_reactions)
        problem.validate(network)
        self.problem = problem
        self.config = config
        self.ka = kernel_arrays(network)
        self.x_start = np.array(problem.start_state, dtype=np.int64)
        self.x_end = np.array(problem.end_state, dtype=np.int64)
        self.seed = np.uint64(int(master_seed) & rng.MASK64)
        self.master_seed = int(master_seed) & rng.MASK64
        self.epoch = epoch
        self.sid_base = np.uint64(rng.stream_id_for(rng.DOMAIN_ATTEMPT, epoch, 0))
        self.m = network.n_reactions

    def buffers(self, n):
        return (
            np.zeros(n, dtype=np.int64),
            np.zeros((n, self.m), dtype=np.int64),
            np.zeros((n, self.m)),
        )

    def run(self, slot_lo, n, accepted, r_out, b_out):
        ka = self.ka
        return attempt_slots(
            self.x_start, self.x_end, ka.react_ptr, ka.react_idx, ka.react_mult, ka.stoich,
            ka.monotone, self.theta, float(self.problem.t_start), float(self.problem.t_end), self.seed,
            self.sid_base, slot_lo, n, self.config.max_events, accepted, r_out, b_out,
        )

    def segment(self, slot, r, b, attempts, simulations):
        sid = rng.stream_id_for(rng.DOMAIN_ATTEMPT, self.epoch, slot)
        return AcceptedSegment(
            rng.StreamState(self.master_seed, sid, 0),
            SufficientStats(r, b),
            attempts,
            simulations,
        )

    def infeasible(self, attempts):
        return InfeasibleIntervalError(
            f"no trajectory from {list(self.problem.start_state)} to "
            f"{list(self.problem.end_state)} over [{self.problem.t_start}, "
            f"{self.problem.t_end}] in {attempts} attempts",
            attempts,
        )


def _select(ctx, domain_slot, candidates):
    """Uniform choice among accepted slot positions using a dedicated stream."""
    sel = rng.make_stream(ctx.master_seed, rng.stream_id_for(rng.DOMAIN_SELECT, ctx.epoch, domain_slot))
    if len(candidates) == 1:
        return candidates[0]
    k = sel.next_categorical(np.ones(len(candidates)), float(len(candidates)))
    return candidates[k]


def _deterministic(ctx):
    cfg = ctx.config
    B = cfg.batch_size
    if cfg.worker_count == 1:
        accepted, r_out, b_out = ctx.buffers(B)
        ka = ctx.ka
        bidx, n, status = run_batches(
            ctx.x_start, ctx.x_end, ka.react_ptr, ka.react_idx, ka.react_mult, ka.stoich,
            ka.monotone, ctx.theta, float(ctx.problem.t_start), float(ctx.problem.t_end), ctx.seed,
            ctx.sid_base, B, cfg.max_attempts, cfg.max_events, accepted, r_out, b_out,
        )
        raise_for_status(status, cfg.max_events)
        if bidx < 0:
            raise ctx.infeasible(cfg.max_attempts)
    else:
        pool = _Pool.get(cfg.worker_count)
        bidx = 0
        while True:
            lo = bidx * B
            if lo >= cfg.max_attempts:
                raise ctx.infeasible(cfg.max_attempts)
            n = min(B, cfg.max_attempts - lo)
            accepted, r_out, b_out = ctx.buffers(n)
            parts = _split(n, cfg.worker_count)
            futures = [
                pool.submit(ctx.run, lo + off, cnt, accepted[off:off + cnt],
                            r_out[off:off + cnt], b_out[off:off + cnt])
                for off, cnt in parts
            ]
            for status in [f.result() for f in futures]:
                raise_for_status(status, cfg.max_events)
            if accepted[:n].any():
                break
            bidx += 1
    hits = [int(k) for k in np.flatnonzero(accepted[:n])]
    chosen = _select(ctx, bidx, hits)
    lo = bidx * B
    return ctx.segment(lo + chosen, r_out[chosen], b_out[chosen], lo + hits[0] + 1, lo + n)


def _fast(ctx):
    cfg = ctx.config
    lock = threading.Lock()
    state = {"next": 0, "success": False}
    results = {}
    errors = []

    def worker():
        accepted, r_out, b_out = ctx.buffers(1)
        while True:
            with lock:
                if state["success"] or errors or state["next"] >= cfg.max_attempts:
                    return
                slot = state["next"]
                state["next"] = slot + 1
            status = ctx.run(slot, 1, accepted, r_out, b_out)
            if status != STATUS_OK:
                with lock:
                    errors.append(status)
                return
            with lock:
                results[slot] = (bool(accepted[0]), r_out[0].copy(), b_out[0].copy())
                if accepted[0]:
                    state["success"] = True

    if cfg.worker_count == 1:
        worker()
    else:
        pool = _Pool.get(cfg.worker_count)
        for f in [pool.submit(worker) for _ in range(cfg.worker_count)]:
            f.result()
    if errors:
        raise_for_status(errors[0], cfg.max_events)
    hits = sorted(slot for slot, res in results.items() if res[0])
    if not hits:
        raise ctx.infeasible(len(results))
    chosen = _select(ctx, 0, hits)
    _, r, b = results[chosen]
    return ctx.segment(chosen, r, b, hits[0] + 1, len(results))


def sample_interval(
    network: ReactionNetwork,
    theta,
    problem: IntervalProblem,
    config: SamplerConfig,
    master_seed: int,
    epoch: int,
    telemetry: list | None = None,
    interval_index: int | None = None,
) -> AcceptedSegment:
    """Draw one endpoint-conditioned segment by parallel rejection sampling.

    Raises :class:`InfeasibleIntervalError` once ``config.max_attempts``
    attempts fail. If ``telemetry`` is a list, one record
    ``{interval, epoch, attempts, simulations, wall_time}`` is appended.
    """
    ctx = _Context(network, theta, problem, config, master_seed, epoch)
    t = time.perf_counter()
    if config.mode == "deterministic":
        seg = _deterministic(ctx)
    else:
        seg = _fast(ctx)
    if telemetry is not None:
        telemetry.append(
            {
                "interval": interval_index,
                "epoch": epoch,
                "attempts": seg.attempts,
                "simulations": seg.simulations,
                "wall_time": time.perf_counter() - t,
            }
        )
    return seg


def attempt(network: ReactionNetwork, theta, problem: IntervalProblem, stream: rng.Stream,
            max_events: int = DEFAULT_MAX_EVENTS):
    """One forward simulation; ``(True, stats)`` if it ends exactly at ``end_state``.

    The stream is advanced past the draws the simulation consumed.
    """
    theta = check_theta(theta, network.n_reactions)
    problem.validate(network)
    status, x, r, b, _, _, counter = run_kernel(
        network, theta, problem.start_state, problem.t_start, problem.t_end,
        stream.master_seed, stream.stream_id, stream.counter, max_events, False,
    )
    raise_for_status(status, max_events)
    stream.counter = counter
    if status != STATUS_UNREACHABLE and tuple(x.tolist()) == problem.end_state:
        return True, SufficientStats(r, b)
    return False, None


def replay(network: ReactionNetwork, theta, problem: IntervalProblem, state: rng.StreamState,
           expected: SufficientStats | None = None,
           max_events: int = DEFAULT_MAX_EVENTS) -> Trajectory:
    """Re-simulate an accepted segment from its stored stream state.

    Raises :class:`ReplayMismatchError` if the path misses ``end_state`` or,
    when ``expected`` is given, if the statistics differ.
    """
    theta = check_theta(theta, network.n_reactions)
    status, x, r, b, ev_t, ev_j, _ = run_kernel(
        network, theta, problem.start_state, problem.t_start, problem.t_end,
        state.master_seed, state.stream_id, state.counter, max_events, True,
    )
    raise_for_status(status, max_events)
    if tuple(x.tolist()) != problem.end_state:
        raise ReplayMismatchError(
            f"replay from {state} ended at {x.tolist()}, expected {list(problem.end_state)}; "
            "stream state and theta are out of sync"
        )
    if expected is not None and not (
        np.array_equal(r, expected.r) and np.array_equal(b, expected.b)
    ):
        raise ReplayMismatchError(f"replay from {state} reproduced different statistics")
    return Trajectory(problem.start_state, ev_t, ev_j, problem.t_start, problem.t_end)
