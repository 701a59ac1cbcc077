"""Data-augmentation Gibbs sampler with conjugate gamma rate updates.

The chain state pairs a rate vector with one accepted segment per
observation interval, the segments having been drawn under that rate
vector. A step draws rates from the gamma full conditional given the
merged segment statistics, then redraws every segment under the new
rates. Initialization draws the segments under ``theta_init``.

Stream usage is positional: the segment of interval ``i`` at Gibbs
iteration ``it`` (0 for initialization) uses epoch ``it * n + i``, and
the rate draw of iteration ``it`` uses ``stream_id_for(DOMAIN_THETA, it, 0)``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import (
    ContractError,
    ImproperPosteriorError,
    IngestionError,
    InfeasibleIntervalError,
    RateUnderflowError,
)
from .network import ReactionNetwork, check_theta
from .sampler import AcceptedSegment, IntervalProblem, SamplerConfig, sample_interval
from .ssa import SufficientStats, merge_stats

log = logging.getLogger(__name__)

WEAK_PRIOR_HINT = "a weak Gamma(1e-3, 1e-3) prior keeps the conditional proper"


@dataclass(frozen=True)
class GammaPrior:
    """Gamma(shape=alpha, rate=beta); (0, 0) is the improper 1/theta prior."""

    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if not (self.alpha >= 0 and self.beta >= 0):
            raise ContractError(f"gamma prior needs alpha, beta >= 0, got {self.alpha}, {self.beta}")

    @property
    def improper(self) -> bool:
        return self.alpha == 0 or self.beta == 0


@dataclass(frozen=True, eq=False)
class Observations:
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        states = np.asarray(self.states, dtype=np.int64)
        if times.ndim != 1 or states.ndim != 2 or states.shape[0] != times.shape[0]:
            raise ContractError("observations need one full state per time")
        if times.shape[0] < 2:
            raise ContractError("need at least 2 observations")
        if np.any(np.diff(times) <= 0):
            raise ContractError("observation times must be strictly increasing")
        if np.any(states < 0):
            raise ContractError("observed counts must be non-negative")
        times.setflags(write=False)
        states.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def n_intervals(self) -> int:
        return self.times.shape[0] - 1

    def problems(self) -> list[IntervalProblem]:
        return [
            IntervalProblem(
                tuple(self.states[i].tolist()),
                tuple(self.states[i + 1].tolist()),
                float(self.times[i]),
                float(self.times[i + 1]),
            )
            for i in range(self.n_intervals)
        ]

    def validate(self, network: ReactionNetwork) -> Observations:
        if self.states.shape[1] != network.n_species:
            raise ContractError(
                f"observations have {self.states.shape[1]} species, network has {network.n_species}"
            )
        first = network.law_values(self.states[0])
        for i, s in enumerate(self.states):
            if network.law_values(s) != first:
                raise ContractError(
                    f"observation {i} at t={self.times[i]} changes a conserved quantity"
                )
        return self


def close_states(network: ReactionNetwork, observed: dict[str, np.ndarray]) -> np.ndarray:
    """Fill unobserved species from the declared conservation laws.

    ``observed`` maps species name to a column of counts. Returns an
    ``(n_rows, N)`` integer array, or raises :class:`IngestionError` if the
    laws do not determine every missing species as a non-negative integer.
    """
    names = network.species
    unknown_names = [s for s in names if s not in observed]
    extra = [s for s in observed if s not in names]
    if extra:
        raise IngestionError(f"unknown species columns {extra}")
    cols = list(observed.values())
    n_rows = len(cols[0]) if cols else 0
    out = np.zeros((n_rows, len(names)), dtype=np.int64)
    for s, col in observed.items():
        out[:, network.species_index(s)] = np.asarray(col, dtype=np.int64)
    if not unknown_names:
        return out
    laws = network.conservation_laws
    U = [network.species_index(s) for s in unknown_names]
    O = [network.species_index(s) for s in names if s in observed]
    if not laws:
        raise IngestionError(f"species {unknown_names} unobserved and no conservation laws declared")
    C = np.array([law.coefficients for law in laws], dtype=np.float64)
    c = np.array([law.constant for law in laws], dtype=np.float64)
    CU = C[:, U]
    if np.linalg.matrix_rank(CU) < len(U):
        # name the species whose column is not pinned down
        undetermined = []
        for k, s in enumerate(unknown_names):
            others = np.delete(CU, k, axis=1)
            if np.linalg.matrix_rank(others) == np.linalg.matrix_rank(CU):
                undetermined.append(s)
        raise IngestionError(
            f"conservation laws do not determine species {undetermined or unknown_names}"
        )
    rhs = c[None, :] - out[:, O] @ C[:, O].T
    sol, *_ = np.linalg.lstsq(CU, rhs.T, rcond=None)
    vals = np.rint(sol.T).astype(np.int64)
    if not np.allclose(vals @ CU.T, rhs, atol=1e-6):
        raise IngestionError("conservation laws are inconsistent with the observed counts")
    if np.any(vals < 0):
        row = int(np.argwhere(vals < 0)[0][0])
        raise IngestionError(f"closure gives negative counts in row {row}")
    out[:, U] = vals
    return out


@dataclass(frozen=True, eq=False)
class ChainState:
    theta: np.ndarray
    segments: tuple[AcceptedSegment, ...]
    iteration: int


@dataclass(frozen=True, eq=False)
class PosteriorSample:
    iteration: int
    theta: np.ndarray
    K_D: float
    K_M: float
    stream_states: tuple[rng.StreamState, ...]
    stats: tuple[SufficientStats, ...] = field(default=(), repr=False)


@dataclass(frozen=True)
class RunConfig:
    burn_in: int = 0
    iterations: int = 0
    thin: int = 1
    theta_init: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.burn_in < 0 or self.iterations < 0 or self.thin < 1:
            raise ContractError("burn_in, iterations must be >= 0 and thin >= 1")


def derived_quantities(theta) -> tuple[float, float]:
    """Dissociation constant theta2/theta1 and Michaelis constant (theta2+theta3)/theta1.

    Missing rates give NaN.
    """
    th = np.asarray(theta, dtype=np.float64)
    if th.shape[0] < 1 or not th[0] > 0:
        raise ContractError("derived quantities need theta_1 > 0")
    kd = th[1] / th[0] if th.shape[0] >= 2 else float("nan")
    km = (th[1] + th[2]) / th[0] if th.shape[0] >= 3 else float("nan")
    return float(kd), float(km)


def posterior_parameters(total: SufficientStats, priors) -> tuple[np.ndarray, np.ndarray]:
    shape = np.array([p.alpha for p in priors]) + total.r
    rate = np.array([p.beta for p in priors]) + total.b
    return shape, rate


def draw_theta(total: SufficientStats, priors, stream: rng.Stream, labels=None) -> np.ndarray:
    """Independent Gamma(alpha_j + r_j, beta_j + b_j) draws, one uniform each."""
    priors = list(priors)
    if len(priors) != total.r.shape[0]:
        raise ContractError(f"{len(priors)} priors for {total.r.shape[0]} reactions")
    shape, rate = posterior_parameters(total, priors)
    for j in range(len(priors)):
        if not (shape[j] > 0 and rate[j] > 0):
            name = labels[j] if labels is not None else f"#{j + 1}"
            raise ImproperPosteriorError(
                f"full conditional for reaction {name} is improper "
                f"(shape {shape[j]}, rate {rate[j]}); {WEAK_PRIOR_HINT}",
                reaction=name,
            )
    theta = np.array([stream.next_gamma(float(shape[j]), float(rate[j])) for j in range(len(priors))])
    for j in np.flatnonzero(theta <= 0.0):
        # shape << 1 puts almost all mass below the smallest double
        name = labels[j] if labels is not None else f"#{j + 1}"
        raise RateUnderflowError(
            f"rate draw for reaction {name} underflowed to 0 (shape {shape[j]}, rate {rate[j]}); "
            "the posterior piles up at the boundary, use a prior with alpha >= 1",
            reaction=name,
        )
    return theta


def _epoch(iteration, n, i):
    return iteration * n + i


def _draw_segments(network, theta, problems, config, master_seed, iteration, telemetry):
    n = len(problems)

    def one(i):
        rec = [] if telemetry is not None else None
        seg = sample_interval(
            network, theta, problems[i], inner, master_seed, _epoch(iteration, n, i),
            telemetry=rec, interval_index=i,
        )
        if rec:
            rec[0]["iteration"] = iteration
        return seg, rec

    if config.mode == "deterministic" and config.worker_count > 1 and n > 1:
        inner = SamplerConfig(config.batch_size, config.max_attempts, config.mode, 1, config.max_events)
        with ThreadPoolExecutor(max_workers=config.worker_count) as pool:
            results = list(pool.map(one, range(n)))
    else:
        inner = config
        results = [one(i) for i in range(n)]
    if telemetry is not None:
        for _, rec in results:
            telemetry.extend(rec)
    return tuple(seg for seg, _ in results)


def _with_context(exc, iteration):
    msg = f"iteration {iteration}: {exc}"
    if isinstance(exc, InfeasibleIntervalError):
        return InfeasibleIntervalError(msg, exc.attempts)
    if isinstance(exc, ImproperPosteriorError):
        return ImproperPosteriorError(msg, exc.reaction)
    if isinstance(exc, RateUnderflowError):
        return RateUnderflowError(msg, exc.reaction)
    return exc


def initialize(network, obs, theta_init, config, master_seed, telemetry=None) -> ChainState:
    theta = check_theta(theta_init, network.n_reactions)
    obs.validate(network)
    try:
        segs = _draw_segments(network, theta, obs.problems(), config, master_seed, 0, telemetry)
    except (InfeasibleIntervalError, ImproperPosteriorError, RateUnderflowError) as exc:
        raise _with_context(exc, 0) from exc
    return ChainState(theta, segs, 0)


def gibbs_step(chain: ChainState, obs: Observations, network: ReactionNetwork, priors,
               config: SamplerConfig, master_seed: int, telemetry=None) -> ChainState:
    """One sweep: rates given the current segments, then segments given the new rates."""
    it = chain.iteration + 1
    try:
        total = merge_stats(seg.stats for seg in chain.segments)
        stream = rng.make_stream(master_seed, rng.stream_id_for(rng.DOMAIN_THETA, it, 0))
        theta = draw_theta(total, priors, stream, labels=network.labels)
        segs = _draw_segments(network, theta, obs.problems(), config, master_seed, it, telemetry)
    except (InfeasibleIntervalError, ImproperPosteriorError, RateUnderflowError) as exc:
        raise _with_context(exc, it) from exc
    return ChainState(theta, segs, it)


def to_sample(chain: ChainState) -> PosteriorSample:
    kd, km = derived_quantities(chain.theta)
    return PosteriorSample(
        chain.iteration,
        chain.theta.copy(),
        kd,
        km,
        tuple(s.initial_stream_state for s in chain.segments),
        tuple(s.stats for s in chain.segments),
    )


def run_chain(network: ReactionNetwork, obs: Observations, priors, run: RunConfig,
              master_seed: int, config: SamplerConfig | None = None,
              telemetry: list | None = None, progress=None) -> list[PosteriorSample]:
    """Initialize, discard ``burn_in`` steps, keep every ``thin``-th of ``iterations`` steps."""
    config = config or SamplerConfig()
    priors = list(priors)
    if len(priors) != network.n_reactions:
        raise ContractError(f"{len(priors)} priors for {network.n_reactions} reactions")
    theta_init = run.theta_init if run.theta_init is not None else (1.0,) * network.n_reactions
    chain = initialize(network, obs, theta_init, config, master_seed, telemetry)
    samples = []
    total = run.burn_in + run.iterations
    for step in range(total):
        chain = gibbs_step(chain, obs, network, priors, config, master_seed, telemetry)
        kept = step - run.burn_in
        if kept >= 0 and (kept + 1) % run.thin == 0:
            samples.append(to_sample(chain))
        if progress is not None:
            progress(step + 1, total)
    return samples


def mean_attempts(telemetry, n_intervals: int) -> np.ndarray:
    out = np.zeros(n_intervals)
    counts = np.zeros(n_intervals)
    for rec in telemetry:
        out[rec["interval"]] += rec["attempts"]
        counts[rec["interval"]] += 1
    return np.divide(out, counts, out=np.full(n_intervals, np.nan), where=counts > 0)
