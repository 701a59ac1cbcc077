"""Bayesian inference for stochastic chemical kinetics by data augmentation.

Latent trajectories between exact observations are drawn by parallel
endpoint-conditioned rejection sampling; rates are updated from their
conjugate gamma full conditionals.
"""

__version__ = "0.1.0"

from .network import ReactionNetwork, parse_network, hazards, propensities, apply_reaction  # noqa: E402
from .rng import Stream, StreamState, make_stream, snapshot, restore  # noqa: E402
from .ssa import SufficientStats, Trajectory, simulate, merge_stats, next_reaction  # noqa: E402
from .sampler import (  # noqa: E402
    AcceptedSegment,
    IntervalProblem,
    SamplerConfig,
    attempt,
    replay,
    sample_interval,
)
from .gibbs import (  # noqa: E402
    GammaPrior,
    Observations,
    RunConfig,
    derived_quantities,
    draw_theta,
    gibbs_step,
    run_chain,
)

__all__ = [
    "AcceptedSegment",
    "GammaPrior",
    "IntervalProblem",
    "Observations",
    "ReactionNetwork",
    "RunConfig",
    "SamplerConfig",
    "Stream",
    "StreamState",
    "SufficientStats",
    "Trajectory",
    "apply_reaction",
    "attempt",
    "derived_quantities",
    "draw_theta",
    "gibbs_step",
    "hazards",
    "make_stream",
    "merge_stats",
    "next_reaction",
    "parse_network",
    "propensities",
    "replay",
    "restore",
    "run_chain",
    "sample_interval",
    "simulate",
    "snapshot",
]
