"""Exact stochastic simulation (direct method) over a closed time window.

Each proposed event consumes one stream counter: the low uniform of the
Philox block picks the reaction index, the high uniform the waiting time.
The final proposal that overshoots the window is discarded but still
consumed. An absorbed state consumes no draws.

When a target end state is supplied, a run stops early as soon as a
species that can only decrease (or only increase) has passed its target;
such a run could never end on the target, so the accept/reject outcome
and the statistics of accepted runs are unchanged.

Hazard integrals ``b_j`` include the terminal slice from the last event
to the window end and are accumulated with Kahan compensation (all
increments are non-negative).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import rng
from .errors import ContractError, CountOverflowError, RunawaySimulationError
from .network import MAX_COUNT, ReactionNetwork, check_theta, hazards, propensities

DEFAULT_MAX_EVENTS = 10**7

STATUS_OK = 0
STATUS_RUNAWAY = 1
STATUS_OVERFLOW = 2
STATUS_BUFFER_FULL = 3
STATUS_UNREACHABLE = 4

MODES = ("trajectory", "stats", "none")


@dataclass(frozen=True)
class KernelArrays:
    """Sparse reactant lists (CSR) and the dense stoichiometry for the kernel."""

    react_ptr: np.ndarray
    react_idx: np.ndarray
    react_mult: np.ndarray
    stoich: np.ndarray
    monotone: np.ndarray


def kernel_arrays(network: ReactionNetwork) -> KernelArrays:
    cached = getattr(network, "_kernel_arrays", None)
    if cached is not None:
        return cached
    K = network.reactant_matrix
    ptr = [0]
    idx, mult = [], []
    for kj in K:
        for i in np.flatnonzero(kj):
            idx.append(i)
            mult.append(kj[i])
        ptr.append(len(idx))
    arrays = KernelArrays(
        np.array(ptr, dtype=np.int64),
        np.array(idx, dtype=np.int64),
        np.array(mult, dtype=np.int64),
        np.ascontiguousarray(network.stoichiometry, dtype=np.int64),
        monotone_directions(network),
    )
    object.__setattr__(network, "_kernel_arrays", arrays)
    return arrays


def monotone_directions(network: ReactionNetwork) -> np.ndarray:
    """Per species: -1 if no reaction increases it, +1 if none decreases it, else 0."""
    V = network.stoichiometry
    out = np.zeros(network.n_species, dtype=np.int64)
    out[np.all(V <= 0, axis=0)] = -1
    out[np.all(V >= 0, axis=0) & np.any(V > 0, axis=0)] = 1
    return out


@njit(cache=True, nogil=True)
def _passed_target(x, target, monotone):
    for i in range(target.shape[0]):
        if monotone[i] < 0 and x[i] < target[i]:
            return True
        if monotone[i] > 0 and x[i] > target[i]:
            return True
    return False


@njit(cache=True, nogil=True)
def _hazards_into(x, ptr, idx, mult, h):
    for j in range(h.shape[0]):
        v = 1.0
        for p in range(ptr[j], ptr[j + 1]):
            n = x[idx[p]]
            k = mult[p]
            if k == 1:
                v *= n
            elif n < k:
                v = 0.0
            else:
                for q in range(k):
                    v *= n - q
        h[j] = v


@njit(cache=True, nogil=True)
def ssa_kernel(
    x, ptr, idx, mult, stoich, theta, t0, t1, seed, sid, counter, max_events,
    r, b, ev_times, ev_idx, record, target, monotone,
):
    """Run one SSA window in place.

    ``x`` is overwritten with the final state; ``r``/``b`` are overwritten
    with the statistics. ``target`` is empty or the end state used for
    early rejection. Returns ``(status, n_events, counter)``.
    """
    m = theta.shape[0]
    h = np.empty(m)
    a = np.empty(m)
    comp = np.zeros(m)
    for j in range(m):
        r[j] = 0
        b[j] = 0.0
    _hazards_into(x, ptr, idx, mult, h)
    a0 = 0.0
    for j in range(m):
        a[j] = theta[j] * h[j]
        a0 += a[j]
    t = t0
    n_events = 0
    status = 0
    one = np.uint64(1)
    check = target.shape[0] > 0
    if check and _passed_target(x, target, monotone):
        return 4, 0, counter
    while a0 > 0.0:
        u1, u2 = rng.uniform_pair_at(seed, sid, counter)
        counter += one
        j = rng.categorical_from_uniform(u1, a, a0)
        tau = -math.log(u2) / a0
        if t + tau > t1:
            break
        if n_events >= max_events:
            status = 1
            break
        if record:
            if n_events >= ev_times.shape[0]:
                status = 3
                break
        for k in range(m):
            y = h[k] * tau - comp[k]
            s = b[k] + y
            comp[k] = (s - b[k]) - y
            b[k] = s
        t += tau
        for i in range(x.shape[0]):
            x[i] += stoich[j, i]
            if x[i] >= 4611686018427387904:
                status = 2
        if status == 2:
            break
        if check and _passed_target(x, target, monotone):
            status = 4
            break
        r[j] += 1
        if record:
            ev_times[n_events] = t
            ev_idx[n_events] = j
        n_events += 1
        _hazards_into(x, ptr, idx, mult, h)
        a0 = 0.0
        for k in range(m):
            a[k] = theta[k] * h[k]
            a0 += a[k]
    if status == 0:
        dt = t1 - t
        for k in range(m):
            y = h[k] * dt - comp[k]
            s = b[k] + y
            comp[k] = (s - b[k]) - y
            b[k] = s
    return status, n_events, counter


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """Firing counts ``r`` and hazard integrals ``b`` per reaction."""

    r: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=np.int64).copy()
        b = np.asarray(self.b, dtype=np.float64).copy()
        if r.shape != b.shape or r.ndim != 1:
            raise ContractError(f"r/b shape mismatch: {r.shape} vs {b.shape}")
        r.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "b", b)

    @classmethod
    def zeros(cls, m: int) -> SufficientStats:
        return cls(np.zeros(m, dtype=np.int64), np.zeros(m))

    def __eq__(self, other):
        if not isinstance(other, SufficientStats):
            return NotImplemented
        return np.array_equal(self.r, other.r) and np.array_equal(self.b, other.b)

    def __repr__(self):
        return f"SufficientStats(r={self.r.tolist()}, b={self.b.tolist()})"


def merge_stats(parts) -> SufficientStats:
    parts = list(parts)
    if not parts:
        raise ContractError("merge_stats needs at least one part")
    m = parts[0].r.shape[0]
    if any(p.r.shape[0] != m for p in parts):
        raise ContractError("cannot merge statistics of different lengths")
    r = np.sum([p.r for p in parts], axis=0)
    b = np.array([math.fsum(p.b[j] for p in parts) for j in range(m)])
    return SufficientStats(r, b)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Initial state, event list, and window; states are reconstructed on demand."""

    initial_state: tuple[int, ...]
    times: np.ndarray
    reactions: np.ndarray
    start_time: float
    end_time: float

    def __post_init__(self):
        object.__setattr__(self, "initial_state", tuple(int(c) for c in self.initial_state))
        times = np.asarray(self.times, dtype=np.float64).copy()
        reactions = np.asarray(self.reactions, dtype=np.int64).copy()
        if times.shape != reactions.shape:
            raise ContractError("times and reactions must have equal length")
        times.setflags(write=False)
        reactions.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "reactions", reactions)

    def __len__(self):
        return int(self.times.shape[0])

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.initial_state == other.initial_state
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.reactions, other.reactions)
            and self.start_time == other.start_time
            and self.end_time == other.end_time
        )

    def states(self, network: ReactionNetwork) -> np.ndarray:
        """``(K+1, N)`` array: initial state followed by the state after each event."""
        steps = network.stoichiometry[self.reactions]
        x0 = np.asarray(self.initial_state, dtype=np.int64)
        return np.vstack([x0, x0 + np.cumsum(steps, axis=0)])

    def final_state(self, network: ReactionNetwork) -> np.ndarray:
        return self.states(network)[-1]

    def state_at(self, network: ReactionNetwork, grid) -> np.ndarray:
        """Right-continuous piecewise-constant state at each grid time."""
        grid = np.asarray(grid, dtype=np.float64)
        pos = np.searchsorted(self.times, grid, side="right")
        return self.states(network)[pos]

    def stats(self, network: ReactionNetwork) -> SufficientStats:
        """Recompute sufficient statistics from the event list."""
        m = network.n_reactions
        r = np.bincount(self.reactions, minlength=m).astype(np.int64)
        states = self.states(network)
        bounds = np.concatenate([[self.start_time], self.times, [self.end_time]])
        durations = np.diff(bounds)
        h = np.array([hazards(network, s) for s in states])
        b = np.array([math.fsum(h[:, j] * durations) for j in range(m)])
        return SufficientStats(r, b)


class _Absorbed:
    def __repr__(self):
        return "ABSORBED"


ABSORBED = _Absorbed()


def next_reaction(x, network: ReactionNetwork, theta, stream: rng.Stream):
    """One (tau, j) draw from the next-reaction density, or ``ABSORBED``."""
    a, a0 = propensities(hazards(network, x), theta)
    if a0 <= 0:
        return ABSORBED
    u_index, u_time = stream.next_uniform_pair()
    j = int(rng.categorical_from_uniform(u_index, a, a0))
    tau = rng.exponential_from_uniform(u_time, a0)
    return tau, j


_NO_TARGET = np.empty(0, dtype=np.int64)


def run_kernel(network, theta, x0, t0, t1, seed, sid, counter, max_events, record,
               target=None):
    """Shared low-level entry: returns (status, final x, r, b, times, idx, counter)."""
    ka = kernel_arrays(network)
    target = _NO_TARGET if target is None else np.asarray(target, dtype=np.int64)
    cap = 1024
    while True:
        x = np.array(x0, dtype=np.int64)
        r = np.zeros(network.n_reactions, dtype=np.int64)
        b = np.zeros(network.n_reactions)
        ev_t = np.empty(cap if record else 0)
        ev_j = np.empty(cap if record else 0, dtype=np.int64)
        status, n, end_counter = ssa_kernel(
            x, ka.react_ptr, ka.react_idx, ka.react_mult, ka.stoich, theta,
            float(t0), float(t1), np.uint64(seed), np.uint64(sid), np.uint64(counter),
            np.int64(max_events), r, b, ev_t, ev_j, record, target, ka.monotone,
        )
        if status == STATUS_BUFFER_FULL:
            cap *= 4
            continue
        return status, x, r, b, ev_t[:n], ev_j[:n], int(end_counter)


def raise_for_status(status, max_events):
    if status == STATUS_RUNAWAY:
        raise RunawaySimulationError(f"simulation exceeded {max_events} events")
    if status == STATUS_OVERFLOW:
        raise CountOverflowError(f"species count reached {MAX_COUNT}")


def simulate(
    network: ReactionNetwork,
    theta,
    x0,
    t0: float,
    t1: float,
    stream: rng.Stream,
    mode: str = "stats",
    max_events: int = DEFAULT_MAX_EVENTS,
):
    """Simulate ``[t0, t1]`` from ``x0``, advancing ``stream``.

    Returns ``(final_state, record)`` where ``record`` is a
    :class:`Trajectory`, :class:`SufficientStats` or ``None`` per ``mode``.
    """
    if mode not in MODES:
        raise ContractError(f"mode must be one of {MODES}, got {mode!r}")
    if not t1 > t0:
        raise ContractError(f"need t1 > t0, got [{t0}, {t1}]")
    theta = check_theta(theta, network.n_reactions)
    x0 = network.check_state(x0)
    status, x, r, b, ev_t, ev_j, counter = run_kernel(
        network, theta, x0, t0, t1, stream.master_seed, stream.stream_id,
        stream.counter, max_events, mode == "trajectory",
    )
    raise_for_status(status, max_events)
    stream.counter = counter
    if mode == "trajectory":
        record = Trajectory(tuple(x0.tolist()), ev_t, ev_j, float(t0), float(t1))
    elif mode == "stats":
        record = SufficientStats(r, b)
    else:
        record = None
    return x, record


# -- trajectory export ---------------------------------------------------------


def write_trajectory(fh, network: ReactionNetwork, traj: Trajectory, meta=None):
    """Write ``time,reaction_label`` rows; comment header carries initial state and window."""
    for key, value in (meta or {}).items():
        fh.write(f"# {key}: {value}\n")
    init = " ".join(f"{s}={c}" for s, c in zip(network.species, traj.initial_state))
    fh.write(f"# initial_state: {init}\n")
    fh.write(f"# window: {traj.start_time!r},{traj.end_time!r}\n")
    fh.write("time,reaction_label\n")
    labels = network.labels
    for t, j in zip(traj.times.tolist(), traj.reactions.tolist()):
        fh.write(f"{t!r},{labels[j]}\n")


def read_trajectory(fh, network: ReactionNetwork) -> Trajectory:
    init = None
    window = None
    times, idx = [], []
    label_index = {lab: j for j, lab in enumerate(network.labels)}
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            key = key.strip()
            if key == "initial_state":
                pairs = dict(tok.split("=") for tok in value.split())
                init = tuple(int(pairs[s]) for s in network.species)
            elif key == "window":
                lo, hi = value.split(",")
                window = (float(lo), float(hi))
            continue
        if line == "time,reaction_label":
            continue
        t, lab = line.split(",")
        times.append(float(t))
        idx.append(label_index[lab])
    if init is None or window is None:
        raise ContractError("trajectory file lacks initial_state/window header")
    return Trajectory(init, np.array(times), np.array(idx, dtype=np.int64), *window)
