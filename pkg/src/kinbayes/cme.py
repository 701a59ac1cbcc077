"""Chemical master equation on small enumerable state spaces.

Transient distributions use uniformization: with ``L = 1.05 * max|q_xx|``
and ``P = I + Q / L``, ``p(t) = sum_k Pois(k; L t) p(0) P^k``. The series
is truncated once the accumulated Poisson weight reaches ``1 - 1e-12``.
Long horizons are split into substeps with ``L * dt <= 100`` so the
Poisson weights never underflow; the truncation error is bounded by
``1e-12`` per substep.

Spaces may be truncated with per-species upper bounds. Mass that leaves a
truncated space is lost (the generator rows of boundary states sum to a
negative value), so results are exact only for probabilities of paths
that stay inside the bounds.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import ContractError, StateSpaceTooLargeError, UndefinedBridgeError
from .network import ReactionNetwork, check_theta, hazards

DEFAULT_CAP = 20_000
UNIFORMIZATION_FACTOR = 1.05
POISSON_TAIL = 1e-12
MAX_SUBSTEP_RATE = 100.0


@dataclass(frozen=True, eq=False)
class StateSpace:
    states: np.ndarray  # (S, N), discovery order
    index: dict
    closed: bool

    def __len__(self):
        return int(self.states.shape[0])

    def position(self, x) -> int | None:
        return self.index.get(tuple(int(c) for c in x))


def enumerate_states(network: ReactionNetwork, x0, cap: int = DEFAULT_CAP,
                     max_counts=None) -> StateSpace:
    """Breadth-first reachability closure from ``x0``.

    ``max_counts`` (per species, ``None`` entries unbounded) truncates the
    space; the result is then marked ``closed=False`` if any transition
    leaves it.
    """
    if cap < 1:
        raise ContractError("cap must be >= 1")
    x0 = tuple(network.check_state(x0).tolist())
    V = network.stoichiometry
    bounds = None
    if max_counts is not None:
        bounds = np.array([np.iinfo(np.int64).max if b is None else b for b in max_counts])
    index = {x0: 0}
    order = [x0]
    queue = deque([x0])
    closed = True
    while queue:
        x = queue.popleft()
        h = hazards(network, x)
        for j in np.flatnonzero(h > 0):
            y = tuple((np.asarray(x) + V[j]).tolist())
            if y in index:
                continue
            if bounds is not None and np.any(np.asarray(y) > bounds):
                closed = False
                continue
            if len(order) >= cap:
                raise StateSpaceTooLargeError(
                    f"more than {cap} states reachable from {list(x0)}"
                )
            index[y] = len(order)
            order.append(y)
            queue.append(y)
    return StateSpace(np.array(order, dtype=np.int64), index, closed)


def generator(network: ReactionNetwork, theta, space: StateSpace) -> sp.csr_matrix:
    """Sparse generator: ``Q[x, x+v_j] = a_j(x)``, ``Q[x, x] = -a_0(x)``."""
    theta = check_theta(theta, network.n_reactions)
    V = network.stoichiometry
    rows, cols, vals = [], [], []
    diag = np.zeros(len(space))
    for s, x in enumerate(space.states):
        a = theta * hazards(network, x)
        diag[s] = -a.sum()
        for j in np.flatnonzero(a > 0):
            t = space.position(x + V[j])
            if t is not None:
                rows.append(s)
                cols.append(t)
                vals.append(a[j])
    n = len(space)
    Q = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return (Q + sp.diags(diag)).tocsr()


def _poisson_weights(lam):
    """Weights Pois(k; lam) for k = 0..K with cumulative mass >= 1 - POISSON_TAIL."""
    w = [math.exp(-lam)]
    total = w[0]
    k = 0
    while total < 1.0 - POISSON_TAIL:
        k += 1
        w.append(w[-1] * lam / k)
        total += w[-1]
        if k > 10 * lam + 1000:
            break
    return np.array(w)


def _uniformized(apply, v, rate, t):
    """``exp(t * G) v`` for the operator ``v -> G v`` with ``max|G_xx| <= rate``."""
    if t == 0 or rate == 0:
        return v.copy()
    lam_total = UNIFORMIZATION_FACTOR * rate
    n_sub = max(1, math.ceil(lam_total * t / MAX_SUBSTEP_RATE))
    dt = t / n_sub
    for _ in range(n_sub):
        weights = _poisson_weights(lam_total * dt)
        term = v.copy()
        acc = weights[0] * term
        for w in weights[1:]:
            term = term + apply(term) / lam_total
            acc += w * term
        v = acc
    return v


def _propagate(Q, v, t, transpose):
    rate = float(np.max(np.abs(Q.diagonal()))) if Q.shape[0] else 0.0
    op = Q.T.tocsr() if transpose else Q
    out = _uniformized(op.dot, np.asarray(v, dtype=np.float64), rate, float(t))
    out[out < 0] = 0.0  # clamp round-off negatives
    return out


def transient_distribution(network: ReactionNetwork, theta, x0, t: float,
                           space: StateSpace | None = None, cap: int = DEFAULT_CAP,
                           max_counts=None):
    """Distribution of the state at time ``t`` started from ``x0``.

    Returns ``(space, p)`` with ``p`` aligned to ``space.states``.
    """
    if t < 0:
        raise ContractError("t must be >= 0")
    if space is None:
        space = enumerate_states(network, x0, cap, max_counts)
    Q = generator(network, theta, space)
    p0 = np.zeros(len(space))
    p0[_require(space, x0)] = 1.0
    return space, _propagate(Q, p0, t, transpose=True)


def _require(space, x):
    pos = space.position(x)
    if pos is None:
        raise ContractError(f"state {list(map(int, x))} is not in the enumerated space")
    return pos


def endpoint_probability(network: ReactionNetwork, theta, x0, x1, dt: float,
                         cap: int = DEFAULT_CAP, max_counts=None) -> float:
    """P(X_dt = x1 | X_0 = x0); 0 when ``x1`` is unreachable."""
    space, p = transient_distribution(network, theta, x0, dt, cap=cap, max_counts=max_counts)
    pos = space.position(x1)
    return 0.0 if pos is None else float(p[pos])


def bridge_distribution(network: ReactionNetwork, theta, x0, x1, dt: float, s: float,
                        cap: int = DEFAULT_CAP, max_counts=None):
    """Law of ``X_s`` given ``X_0 = x0`` and ``X_dt = x1``; returns ``(space, p)``."""
    if not 0 < s < dt:
        raise ContractError(f"need 0 < s < dt, got s={s}, dt={dt}")
    space = enumerate_states(network, x0, cap, max_counts)
    pos1 = space.position(x1)
    if pos1 is None:
        raise UndefinedBridgeError(f"{list(map(int, x1))} is unreachable from {list(map(int, x0))}")
    Q = generator(network, theta, space)
    forward = np.zeros(len(space))
    forward[_require(space, x0)] = 1.0
    forward = _propagate(Q, forward, s, transpose=True)
    backward = np.zeros(len(space))
    backward[pos1] = 1.0
    backward = _propagate(Q, backward, dt - s, transpose=False)
    joint = forward * backward
    total = joint.sum()
    if not total > 0:
        raise UndefinedBridgeError("endpoint probability is zero")
    return space, joint / total


def dense_transient(network: ReactionNetwork, theta, x0, t: float, space: StateSpace | None = None,
                    max_states: int = 200):
    """Cross-check path: dense ``expm`` (scaling and squaring) on small spaces."""
    if space is None:
        space = enumerate_states(network, x0, max_states)
    if len(space) > max_states:
        raise StateSpaceTooLargeError(f"dense path limited to {max_states} states")
    Q = generator(network, theta, space).toarray()
    p0 = np.zeros(len(space))
    p0[_require(space, x0)] = 1.0
    return space, p0 @ scipy.linalg.expm(Q * t)


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def empirical_distribution(space: StateSpace, states) -> np.ndarray:
    """Frequencies of ``states`` (rows) over ``space``; states outside are an error."""
    counts = np.zeros(len(space))
    for x in np.asarray(states):
        counts[_require(space, x)] += 1
    return counts / max(1, len(states))


def format_distribution(space: StateSpace, p, min_prob: float = 0.0) -> list[str]:
    """``state_tuple,probability`` rows; the tuple is space-separated inside parentheses."""
    rows = []
    for x, pr in zip(space.states.tolist(), np.asarray(p).tolist()):
        if pr >= min_prob:
            rows.append(f"({' '.join(map(str, x))}),{pr!r}")
    return rows
