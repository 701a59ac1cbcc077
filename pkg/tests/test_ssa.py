import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kinbayes import rng, ssa
from kinbayes.errors import ContractError, RunawaySimulationError
from kinbayes.network import hazards, parse_network
from kinbayes.ssa import ABSORBED, SufficientStats, merge_stats, next_reaction, simulate

from .conftest import MM_THETA


def test_single_enabled_reaction(iso):
    s = rng.make_stream(1, 0)
    draws = [next_reaction((1, 0), iso, (2.0,), s) for _ in range(10**5)]
    assert {j for _, j in draws} == {0}
    taus = np.array([t for t, _ in draws])
    assert abs(taus.mean() - 0.5) < 3 * 0.5 / math.sqrt(10**5)


def test_absorbed(iso):
    assert next_reaction((0, 1), iso, (1.0,), rng.make_stream(1, 0)) is ABSORBED


def test_mm_first_reaction_is_bind(mm):
    s = rng.make_stream(1, 0)
    assert {next_reaction((120, 301, 0, 0), mm, MM_THETA, s)[1] for _ in range(200)} == {0}


def test_next_reaction_matches_kernel_draw(mm):
    """The kernel consumes exactly one counter per proposed event, like next_reaction."""
    s = rng.make_stream(9, 4)
    x = np.array([120, 301, 0, 0])
    t, events = 0.0, []
    while True:
        out = next_reaction(x, mm, MM_THETA, s)
        if out is ABSORBED or t + out[0] > 1.0:
            break
        t += out[0]
        x = x + mm.stoichiometry[out[1]]
        events.append((t, out[1]))
    _, traj = simulate(mm, MM_THETA, (120, 301, 0, 0), 0.0, 1.0, rng.make_stream(9, 4), "trajectory")
    assert [j for _, j in events] == traj.reactions.tolist()
    np.testing.assert_allclose([t for t, _ in events], traj.times, rtol=0, atol=1e-12)


def test_frozen_state(iso):
    x, stats = simulate(iso, (1.0,), (0, 3), 0.0, 2.5, rng.make_stream(1, 0))
    np.testing.assert_array_equal(x, [0, 3])
    np.testing.assert_array_equal(stats.r, [0])
    assert stats.b[0] == 0.0
    dimer = parse_network("species: A B\nreaction: 2A -> B\nreaction: B -> A + B\n")
    # A=1, B=0: nothing can fire, b_j = h_j(x0) * window
    x, stats = simulate(dimer, (1.0, 1.0), (1, 0), 1.0, 3.0, rng.make_stream(1, 0))
    np.testing.assert_array_equal(stats.r, [0, 0])
    np.testing.assert_array_equal(stats.b, [0.0, 0.0])


def test_isomerization_probability(iso):
    n = 10**5
    s = rng.make_stream(2, 0)
    hits = 0
    for _ in range(n):
        x, _ = simulate(iso, (1.0,), (1, 0), 0.0, 1.0, s, mode="none")
        hits += int(x[1])
    p = 1 - math.exp(-1)
    assert abs(hits / n - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_mm_substrate_never_increases(mm):
    # unbinding releases free S, so only free plus bound substrate is monotone
    for k in range(5):
        s = rng.make_stream(3, k)
        _, traj = simulate(mm, MM_THETA, (120, 301, 0, 0), 0.0, 100.0, s, "trajectory")
        X = traj.states(mm)
        assert np.all(np.diff(X[:, 1] + X[:, 2]) <= 0)
        assert np.all(np.diff(X[:, 3]) >= 0)
        assert X[-1, 1] < 100


def test_stream_advances(mm):
    s = rng.make_stream(3, 1)
    simulate(mm, MM_THETA, (120, 301, 0, 0), 0.0, 1.0, s)
    first = s.counter
    assert first > 0
    s2 = rng.make_stream(3, 1)
    simulate(mm, MM_THETA, (120, 301, 0, 0), 0.0, 1.0, s2, mode="trajectory")
    assert s2.counter == first


@given(st.integers(0, 2**32), st.floats(0.1, 20.0))
def test_trajectory_invariants(mm, seed, t1):
    s = rng.make_stream(seed, 0)
    x_stats, stats = simulate(mm, MM_THETA, (120, 301, 0, 0), 0.0, t1, rng.make_stream(seed, 0))
    x, traj = simulate(mm, MM_THETA, (120, 301, 0, 0), 0.0, t1, s, "trajectory")
    np.testing.assert_array_equal(x, x_stats)
    assert np.all(np.diff(traj.times) > 0)
    if len(traj):
        assert traj.times[0] > 0.0 and traj.times[-1] <= t1
    assert np.all(traj.states(mm) >= 0)
    assert stats.r.sum() == len(traj)
    # independent recompute of the sufficient statistics from the event list
    ref = traj.stats(mm)
    np.testing.assert_array_equal(ref.r, stats.r)
    np.testing.assert_allclose(ref.b, stats.b, rtol=1e-12)
    np.testing.assert_array_equal(traj.final_state(mm), x)


def test_b_is_integral_of_hazard(mm):
    _, traj = simulate(mm, MM_THETA, (120, 301, 0, 0), 0.0, 5.0, rng.make_stream(8, 8), "trajectory")
    grid = np.linspace(0.0, 5.0, 200001)
    mid = (grid[:-1] + grid[1:]) / 2
    states = traj.state_at(mm, mid)
    h = np.array([hazards(mm, x) for x in states[::50]])
    approx = h.sum(axis=0) * (grid[1] - grid[0]) * 50
    np.testing.assert_allclose(traj.stats(mm).b, approx, rtol=5e-3)


def test_merge():
    s = SufficientStats(np.array([1, 2]), np.array([2.0, 0.5]))
    assert merge_stats([s, SufficientStats.zeros(2)]) == s
    m = merge_stats([SufficientStats(np.array([1]), np.array([2.0])),
                     SufficientStats(np.array([2]), np.array([3.0]))])
    assert m == SufficientStats(np.array([3]), np.array([5.0]))
    with pytest.raises(ContractError):
        merge_stats([])


def test_merge_of_pieces_equals_whole(mm):
    """Stats of ten consecutive windows add up to the stats of the joined path."""
    s = rng.make_stream(5, 5)
    x = np.array([120, 301, 0, 0])
    parts, times, idx = [], [], []
    for i in range(10):
        x0 = x.copy()
        x, traj = simulate(mm, MM_THETA, x0, 10.0 * i, 10.0 * (i + 1), s, "trajectory")
        parts.append(traj.stats(mm))
        times.extend(traj.times.tolist())
        idx.extend(traj.reactions.tolist())
    whole = ssa.Trajectory((120, 301, 0, 0), np.array(times), np.array(idx), 0.0, 100.0)
    merged = merge_stats(parts)
    ref = whole.stats(mm)
    np.testing.assert_array_equal(merged.r, ref.r)
    np.testing.assert_allclose(merged.b, ref.b, rtol=1e-12)


def test_runaway_cap():
    net = parse_network("species: A\nreaction: A -> 2A\n")
    with pytest.raises(RunawaySimulationError):
        simulate(net, (1.0,), (100,), 0.0, 10.0, rng.make_stream(1, 0), max_events=1000)


def test_big_buffer_growth(mm):
    _, traj = simulate(mm, MM_THETA, (120, 301, 0, 0), 0.0, 100.0, rng.make_stream(4, 4), "trajectory")
    assert len(traj) > 1024


def test_bad_arguments(mm):
    s = rng.make_stream(1, 0)
    with pytest.raises(ContractError):
        simulate(mm, MM_THETA, (120, 301, 0, 0), 1.0, 1.0, s)
    with pytest.raises(ContractError):
        simulate(mm, (0.0, 0.2, 0.1), (120, 301, 0, 0), 0.0, 1.0, s)
    with pytest.raises(ContractError):
        simulate(mm, MM_THETA, (120, 301, 0, 0), 0.0, 1.0, s, mode="bogus")


def test_state_at_right_continuous(iso):
    traj = ssa.Trajectory((2, 0), np.array([0.5, 1.5]), np.array([0, 0]), 0.0, 2.0)
    np.testing.assert_array_equal(traj.state_at(iso, [0.0, 0.5, 1.0, 1.5, 2.0])[:, 1], [0, 1, 1, 2, 2])


def test_trajectory_file_roundtrip(mm):
    _, traj = simulate(mm, MM_THETA, (120, 301, 0, 0), 0.0, 3.0, rng.make_stream(6, 0), "trajectory")
    buf = io.StringIO()
    ssa.write_trajectory(buf, mm, traj, {"seed": 6})
    buf.seek(0)
    back = ssa.read_trajectory(buf, mm)
    assert back == traj
