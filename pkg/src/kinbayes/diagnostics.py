"""Convergence diagnostics and posterior summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DegenerateVarianceError
from .network import ReactionNetwork
from .sampler import replay


def gelman_rubin(chains) -> float:
    """Potential scale reduction for ``m >= 2`` chains of equal length ``n >= 10``.

    ``W`` is the mean within-chain variance, ``B`` is ``n`` times the
    variance of the chain means, and
    ``R = sqrt(((n - 1) / n * W + B / n) / W)``.
    """
    x = np.asarray(chains, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ContractError("need at least 2 chains of equal length")
    m, n = x.shape
    if n < 10:
        raise ContractError("chains must have at least 10 samples")
    W = x.var(axis=1, ddof=1).mean()
    if W == 0:
        raise DegenerateVarianceError("zero within-chain variance in every chain")
    B = n * x.mean(axis=1).var(ddof=1)
    return float(np.sqrt(((n - 1) / n * W + B / n) / W))


@dataclass(frozen=True)
class Summary:
    mean: float
    quantiles: dict


def summarize(samples, quantiles=(0.025, 0.5, 0.975)) -> Summary:
    """Mean and empirical quantiles, linear interpolation between order statistics."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ContractError("cannot summarize an empty sample")
    qs = np.quantile(x, list(quantiles), method="linear")
    return Summary(float(x.mean()), {float(q): float(v) for q, v in zip(quantiles, qs)})


def histogram(samples, bins=30) -> list[tuple[float, float, int]]:
    """``(bin_left, bin_right, count)`` rows."""
    counts, edges = np.histogram(np.asarray(samples, dtype=np.float64), bins=bins)
    return [(float(lo), float(hi), int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]


@dataclass(frozen=True, eq=False)
class TrajectoryBand:
    grid: np.ndarray
    species: tuple[str, ...]
    lower: np.ndarray   # (N, G)
    median: np.ndarray
    upper: np.ndarray
    paths: np.ndarray  # (S, G, N) evaluated sample paths


def path_on_grid(network: ReactionNetwork, sample, obs, grid) -> np.ndarray:
    """Replay every segment of one posterior sample and read the state at ``grid``."""
    grid = np.asarray(grid, dtype=np.float64)
    out = np.empty((grid.shape[0], network.n_species), dtype=np.int64)
    problems = obs.problems()
    # grid point g belongs to the interval [t_{i-1}, t_i); the final time to the last one
    which = np.clip(np.searchsorted(obs.times, grid, side="right") - 1, 0, len(problems) - 1)
    for i in np.unique(which):
        stats = sample.stats[i] if sample.stats else None
        traj = replay(network, sample.theta, problems[i], sample.stream_states[i], expected=stats)
        mask = which == i
        out[mask] = traj.state_at(network, grid[mask])
    return out


def trajectory_bands(samples, network: ReactionNetwork, obs, grid,
                     quantiles=(0.025, 0.975)) -> TrajectoryBand:
    """Point-wise lower/median/upper quantiles of replayed posterior paths."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ContractError("grid must be non-empty and increasing")
    if grid[0] < obs.times[0] or grid[-1] > obs.times[-1]:
        raise ContractError("grid must lie within the observation window")
    samples = list(samples)
    if not samples:
        raise ContractError("need at least one posterior sample")
    paths = np.stack([path_on_grid(network, s, obs, grid) for s in samples])
    lo, hi = quantiles
    q = np.quantile(paths, [lo, 0.5, hi], axis=0, method="linear")  # (3, G, N)
    return TrajectoryBand(grid, network.species, q[0].T, q[1].T, q[2].T, paths)


def band_rows(band: TrajectoryBand) -> list[str]:
    rows = []
    lower, median, upper = band.lower.tolist(), band.median.tolist(), band.upper.tolist()
    for g, t in enumerate(band.grid.tolist()):
        for i, name in enumerate(band.species):
            rows.append(f"{t!r},{name},{lower[i][g]!r},{median[i][g]!r},{upper[i][g]!r}")
    return rows
