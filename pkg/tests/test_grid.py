import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpsim import OutOfRangeError, PathStream
from cpsim.grid import (
    GridBrownian,
    count_at,
    prefix_sum,
    prefix_sums,
    rescaled_count,
    sample_increments,
    sample_increments_batch,
    sample_jump_grid,
    sample_jump_grids,
)
from cpsim.harness.stats import mean_se


def test_hand_computed_jump_times(fixed_stream):
    g = sample_jump_grid(0.1, 1.0, fixed_stream([math.exp(-2), math.exp(-3), math.exp(-20)]))
    np.testing.assert_allclose(g.jump_times, [0.2, 0.5, 2.5], rtol=1e-14)
    assert g.count_cutoff == 2
    assert count_at(g, 0.6) == 2
    assert count_at(g, 0.0) == 0
    assert rescaled_count(g, 0.6) == pytest.approx(0.2)
    assert rescaled_count(g, 0.0) == 0.0


def test_jump_exactly_at_query_is_counted(fixed_stream):
    g = sample_jump_grid(0.1, 1.0, fixed_stream([math.exp(-2), math.exp(-3), math.exp(-20)]))
    assert count_at(g, float(g.jump_times[0])) == 1
    assert count_at(g, float(np.nextafter(g.jump_times[0], 0))) == 0


def test_first_jump_past_horizon_gives_empty_grid(fixed_stream):
    g = sample_jump_grid(0.5, 1e-6, fixed_stream([math.exp(-1)]))
    assert g.count_cutoff == 0
    assert g.active_times.size == 0
    assert count_at(g, 1e-6) == 0


def test_count_outside_horizon_raises(fixed_stream):
    g = sample_jump_grid(0.1, 1.0, fixed_stream([0.5]))
    with pytest.raises(OutOfRangeError):
        count_at(g, 1.5)
    with pytest.raises(OutOfRangeError):
        rescaled_count(g, -0.1)


def test_count_is_right_continuous_step_function():
    g = sample_jump_grid(0.05, 2.0, PathStream(1, 0))
    ts = np.linspace(0, 2, 2001)
    c = np.array([count_at(g, t) for t in ts])
    assert np.all(np.diff(c) >= 0)
    for k, s in enumerate(g.active_times, start=1):
        assert count_at(g, float(s)) == k


def test_batch_rows_equal_single_paths():
    batch = sample_jump_grids(0.01, 1.0, 99, np.arange(6))
    for p in range(6):
        single = sample_jump_grid(0.01, 1.0, PathStream(99, p))
        g = batch.grid(p)
        assert np.array_equal(g.jump_times, single.jump_times)
        assert g.count_cutoff == single.count_cutoff


def test_extension_chunks_do_not_change_times():
    # a long horizon forces several extension chunks; the path must match a short run's prefix
    long = sample_jump_grid(0.01, 50.0, PathStream(4, 2))
    short = sample_jump_grid(0.01, 1.0, PathStream(4, 2))
    n = short.count_cutoff
    assert np.array_equal(long.jump_times[:n + 1], short.jump_times)


def test_increments_from_fixed_normals(fixed_stream):
    b = sample_increments(GridBrownian.empty(0.25), 2, fixed_stream(normals=[1.0, -2.0]))
    np.testing.assert_array_equal(b.increments[:, 0], [0.5, -1.0])
    assert prefix_sum(b, 2)[0] == -0.5
    assert prefix_sum(b, 0)[0] == 0.0


def test_prefix_sum_range_error():
    b = sample_increments(GridBrownian.empty(0.1), 3, PathStream(0, 0))
    with pytest.raises(OutOfRangeError):
        prefix_sum(b, 4)
    with pytest.raises(OutOfRangeError):
        sample_increments(b, 2, PathStream(0, 0))


def test_incremental_extension_keeps_old_values():
    s = PathStream(8, 3)
    b1 = sample_increments(GridBrownian.empty(0.1, 2), 3, s)
    b2 = sample_increments(b1, 10, s)
    b_all = sample_increments(GridBrownian.empty(0.1, 2), 10, s)
    assert np.array_equal(b2.increments[:3], b1.increments)
    assert np.array_equal(b2.increments, b_all.increments)
    batch = sample_increments_batch(0.1, 2, 10, 8, [3])
    assert np.array_equal(batch[0], b_all.increments)


@settings(max_examples=25, deadline=None)
@given(k=st.integers(min_value=1, max_value=200), seed=st.integers(min_value=0, max_value=2**32))
def test_prefix_sum_telescopes_exactly(k, seed):
    b = sample_increments(GridBrownian.empty(0.01), 200, PathStream(seed, 0))
    # the running sum is built by one rounded addition per step, so this holds bitwise
    assert np.array_equal(prefix_sum(b, k), prefix_sum(b, k - 1) + b.increments[k - 1])
    assert np.array_equal(prefix_sums(b.increments[None])[0, k], prefix_sum(b, k))


def test_increment_variance():
    inc = sample_increments_batch(0.25, 1, 1, 12, np.arange(100_000))[:, 0, 0]
    assert abs(inc.var(ddof=1) / 0.25 - 1) < 0.05


@pytest.mark.parametrize("eps", [0.1, 0.01])
def test_rescaled_count_moments(eps):
    batch = sample_jump_grids(eps, 2.0, 2024, np.arange(100_000))
    for t in (0.5, 1.0, 2.0):
        dev = eps * batch.counts_at(t) - t
        m, se = mean_se(dev)
        assert abs(m) <= 3 * se
        m2, se2 = mean_se(dev**2)
        assert abs(m2 - eps * t) <= 3 * se2
