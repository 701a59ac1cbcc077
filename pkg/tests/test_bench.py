import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kinbayes import bench
from kinbayes.errors import ContractError
from kinbayes.sampler import IntervalProblem

from .oracles import birth_probability


def test_amdahl_examples():
    assert bench.amdahl_speedup(0.0, 7) == 1.0
    assert bench.amdahl_speedup(1.0, 4) == 4.0
    assert bench.amdahl_speedup(0.5, 2) == 4 / 3


@pytest.mark.parametrize("P, C", [(-0.1, 2), (1.1, 2), (0.5, 0), (0.5, 1.5)])
def test_amdahl_errors(P, C):
    with pytest.raises(ContractError):
        bench.amdahl_speedup(P, C)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 256), st.integers(1, 256))
def test_amdahl_monotone(p1, p2, c1, c2):
    lo_p, hi_p = sorted((p1, p2))
    lo_c, hi_c = sorted((c1, c2))
    assert bench.amdahl_speedup(lo_p, lo_c) <= bench.amdahl_speedup(hi_p, lo_c) + 1e-12
    assert bench.amdahl_speedup(lo_p, lo_c) <= bench.amdahl_speedup(lo_p, hi_c) + 1e-12
    assert 1.0 <= bench.amdahl_speedup(p1, c1) <= c1 + 1e-12


def test_trivial_point(iso):
    spec = bench.SweepSpec(iso, (1.0,), 0, (1.0,), IntervalProblem((0, 1), (0, 1), 0.0, 1.0),
                           replicates=5, timing_repeats=1)
    row, = bench.run_sweep(spec, [2])
    assert row.mean_attempts == 1.0
    assert row.efficiency > 0 and not row.error


def test_birth_grid(birth):
    values = (0.5, 1.0, 2.0)
    spec = bench.SweepSpec(birth, (1.0,), 0, values, IntervalProblem((0,), (1,), 0.0, 1.0),
                           replicates=400, mode="deterministic", timing_repeats=1)
    rows = bench.run_sweep(spec, [1, 4])
    for row in rows:
        p = birth_probability(row.grid_value, 1.0, 1)
        assert abs(row.mean_attempts - 1 / p) < 3 * row.se_attempts
    # attempts are scheduling independent in deterministic mode
    by_value = {}
    for row in rows:
        by_value.setdefault(row.grid_value, []).append(row.attempts)
    assert all(a == b for a, b in by_value.values())
    lines = bench.sweep_rows(rows)
    assert lines[0] == "grid_value,workers,mean_attempts,mean_time,efficiency"
    assert len(lines) == 7


def test_infeasible_point_reported(iso):
    spec = bench.SweepSpec(iso, (1.0,), 0, (1.0, 2.0), IntervalProblem((2, 0), (3, 0), 0.0, 1.0),
                           replicates=2, max_attempts=64, timing_repeats=1)
    rows = bench.run_sweep(spec, [1])
    assert len(rows) == 2 and all(r.error.startswith("infeasible") for r in rows)
    assert bench.sweep_rows(rows)[1].endswith("nan,nan,nan")


def test_spec_validation(iso):
    prob = IntervalProblem((0, 1), (0, 1), 0.0, 1.0)
    with pytest.raises(ContractError):
        bench.SweepSpec(iso, (1.0,), 0, (), prob)
    with pytest.raises(ContractError):
        bench.SweepSpec(iso, (1.0,), 0, (-1.0,), prob)
    with pytest.raises(ContractError):
        bench.SweepSpec(iso, (1.0,), 3, (1.0,), prob)


def test_efficiency_within_amdahl(birth):
    spec = bench.SweepSpec(birth, (1.0,), 0, (3.0,), IntervalProblem((0,), (0,), 0.0, 1.0),
                           replicates=50, timing_repeats=3)
    row, = bench.run_sweep(spec, [4])
    assert 0 <= row.parallel_fraction <= 1
    assert row.amdahl_bound >= 1.0
    assert not math.isnan(row.efficiency)
    # generous tolerance: timings of tiny workloads are noisy
    assert row.efficiency <= 1.5 * row.amdahl_bound
