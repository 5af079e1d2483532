import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from maxgof.bootstrap import (
    BootstrapConfig,
    IndexMap2D,
    batch_counts,
    bootstrap_lattice,
    bootstrapped_extremogram,
    bootstrapped_integrated,
    geometric_block_lengths,
    product_fields,
    replicate_table,
    stationary_resample_1d,
    theta_schedule_warnings,
)
from maxgof.extremal import ExceedanceField, LagFunction, ThresholdPlan, truncated_extremogram
from maxgof.fields import make_rng
from maxgof.integrated import integrated_surface


def ex_field(ind, p0=0.1):
    return ExceedanceField(np.asarray(ind, dtype=np.int64), ThresholdPlan(p0=p0, a_mn=1.0))


def naive_gamma_star(ind, index_map, lags, m_n):
    """Average I_s * I_{s+h} (wrapped, on the original lattice) over resampled sites."""
    n = ind.shape[0]
    out = []
    for h1, h2 in lags:
        total = 0
        for t1 in range(n):
            for t2 in range(n):
                s1, s2 = index_map.row_map[t1], index_map.col_map[t2]
                total += ind[s1, s2] * ind[(s1 + h1) % n, (s2 + h2) % n]
        out.append(m_n * total / n ** 2)
    return np.array(out)


# ---------------------------------------------------------------- 1-D resampler

def test_theta_one_gives_unit_blocks_and_uniform_draws():
    rng = make_rng(1)
    assert np.all(geometric_block_lengths(1.0, 50, rng) == 1)
    n = 6
    draws = np.concatenate([stationary_resample_1d(n, 1.0, make_rng(2, k)) for k in range(3000)])
    counts = np.bincount(draws, minlength=n)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_theta_one_consecutive_entries_independent():
    # with unit blocks, the successor of an index is not index + 1 more often than chance
    seqs = np.stack([stationary_resample_1d(8, 1.0, make_rng(3, k)) for k in range(4000)])
    follow = np.mean(seqs[:, 1:] == (seqs[:, :-1] + 1) % 8)
    assert follow == pytest.approx(1 / 8, abs=0.01)


def test_mean_block_length():
    lengths = geometric_block_lengths(0.1, 100_000, make_rng(4))
    assert lengths.mean() == pytest.approx(10.0, abs=0.1)
    assert lengths.min() >= 1


@pytest.mark.parametrize("n,theta", [(1, 0.5), (5, 0.01), (13, 0.3), (40, 1.0)])
def test_resample_length_and_range(n, theta):
    seq = stationary_resample_1d(n, theta, make_rng(5))
    assert seq.shape == (n,)
    assert seq.min() >= 0 and seq.max() < n


def test_resample_blocks_are_circular_runs():
    seq = stationary_resample_1d(30, 0.05, make_rng(6))
    steps = (np.diff(seq) % 30)
    # most steps continue the current block
    assert np.mean(steps == 1) > 0.8


def test_resample_validation():
    with pytest.raises(ValueError):
        stationary_resample_1d(0, 0.5, make_rng(0))
    with pytest.raises(ValueError):
        stationary_resample_1d(5, 0.0, make_rng(0))
    with pytest.raises(ValueError):
        BootstrapConfig(theta=1.5, replicates=10, r_n=2)


# ---------------------------------------------------------------- 2-D maps

def test_lattice_maps_uniform_under_theta_one():
    n = 5
    rows, cols = [], []
    for k in range(2000):
        m = bootstrap_lattice(n, 1.0, make_rng(7, k))
        rows.append(m.row_map)
        cols.append(m.col_map)
    for arr in (np.concatenate(rows), np.concatenate(cols)):
        assert stats.chisquare(np.bincount(arr, minlength=n)).pvalue > 1e-3


def test_map_apply_identity():
    vals = np.arange(36.0).reshape(6, 6)
    m = bootstrap_lattice(6, 0.3, make_rng(8))
    out = m.apply(vals)
    for t1 in range(6):
        for t2 in range(6):
            assert out[t1, t2] == vals[m.row_map[t1], m.col_map[t2]]
    assert_array_equal(IndexMap2D.identity(6).apply(vals), vals)


def test_distinct_streams_differ():
    a = bootstrap_lattice(40, 0.1, make_rng(9, 2, 0))
    b = bootstrap_lattice(40, 0.1, make_rng(9, 2, 1))
    assert not (np.array_equal(a.row_map, b.row_map) and np.array_equal(a.col_map, b.col_map))


# ---------------------------------------------------------------- gamma star

def test_identity_map_gives_truncated_extremogram():
    ind = (np.random.default_rng(0).random((12, 12)) < 0.2).astype(int)
    e = ex_field(ind)
    star = bootstrapped_extremogram(e, IndexMap2D.identity(12), 3)
    assert_allclose(star.values, truncated_extremogram(e, 3).values, rtol=0, atol=1e-15)


def test_all_ones_gives_m_n():
    e = ex_field(np.ones((7, 7)), p0=0.2)
    star = bootstrapped_extremogram(e, bootstrap_lattice(7, 0.4, make_rng(10)), 2)
    assert_allclose(star.values, 5.0)


def test_gamma_star_matches_naive():
    rng = np.random.default_rng(11)
    ind = (rng.random((9, 9)) < 0.3).astype(int)
    e = ex_field(ind)
    for k in range(5):
        m = bootstrap_lattice(9, 0.25, make_rng(12, k))
        star = bootstrapped_extremogram(e, m, 3)
        assert_allclose(star.values, naive_gamma_star(ind, m, star.lags, 10.0), atol=1e-12)


def test_single_block_average_is_circular_mean():
    # every map that is one full circular shift per axis, averaged, gives m_n C_n(h)
    n = 4
    ind = np.array([[1, 0, 0, 1], [0, 1, 0, 0], [0, 0, 0, 1], [1, 1, 0, 0]])
    e = ex_field(ind, p0=0.25)
    shifts = [(np.arange(n) + s) % n for s in range(n)]
    acc = 0.0
    for r in shifts:
        for c in shifts:
            acc = acc + bootstrapped_extremogram(e, IndexMap2D(r, c), 2).values
    assert_allclose(acc / n ** 2, truncated_extremogram(e, 2).values, atol=1e-12)


def test_batch_counts_match_single_maps():
    ind = (np.random.default_rng(13).random((10, 10)) < 0.25).astype(int)
    e = ex_field(ind)
    lags = LagFunction.lag_set(3, 10)
    maps = [bootstrap_lattice(10, 0.2, make_rng(14, k)) for k in range(6)]
    counts = batch_counts(product_fields(e, lags), maps)
    assert counts.dtype.kind == "i"
    for row, m in zip(counts, maps):
        star = bootstrapped_extremogram(e, m, 3)
        assert_allclose(10.0 * row / 100, star.values, atol=1e-12)


def test_r_n_validation():
    with pytest.raises(ValueError):
        bootstrapped_extremogram(ex_field(np.zeros((5, 5))), IndexMap2D.identity(5), 5)


# ---------------------------------------------------------------- J star

def test_bootstrapped_integrated():
    ind = (np.random.default_rng(15).random((16, 16)) < 0.2).astype(int)
    e = ex_field(ind)
    ident = bootstrapped_extremogram(e, IndexMap2D.identity(16), 3)
    assert_allclose(bootstrapped_integrated(ident, 16).values,
                    integrated_surface(truncated_extremogram(e, 3), 16).values)
    zero = bootstrapped_extremogram(ex_field(np.zeros((16, 16))), IndexMap2D.identity(16), 3)
    assert np.all(bootstrapped_integrated(zero, 16).values == 0)
    a = bootstrapped_extremogram(e, bootstrap_lattice(16, 0.2, make_rng(16, 0)), 3)
    b = bootstrapped_extremogram(e, bootstrap_lattice(16, 0.2, make_rng(16, 1)), 3)
    mix = LagFunction(a.lags, 0.3 * a.values + 0.7 * b.values)
    assert_allclose(bootstrapped_integrated(mix, 16).values,
                    0.3 * bootstrapped_integrated(a, 16).values
                    + 0.7 * bootstrapped_integrated(b, 16).values, atol=1e-12)


def test_replicate_table():
    g = LagFunction([[0, 0], [1, 0]], [1.0, 0.5])
    text = replicate_table([g, g.scaled(2)])
    lines = text.strip().splitlines()
    assert lines[0] == "replicate,h1,h2,gamma_star"
    assert lines[1] == "1,0,0,1.0"
    assert lines[-1] == "2,1,0,1.0"


def test_theta_schedule():
    # exponential mixing: the tail term shrinks only when c log n outpaces the block growth;
    # the log^3 factor in the first term dominates below n ~ 1e4
    ns = [10 ** 4, 10 ** 5, 10 ** 6]
    assert theta_schedule_warnings(ns, c=4.0) == []
    with pytest.warns(RuntimeWarning, match="mixing tail term"):
        msgs = theta_schedule_warnings(ns, c=2.0)
    assert len(msgs) == 2


def test_theta_one_full_law_n3():
    # theta=1, n=3: every one of the 27 index triples is equally likely
    rng = make_rng(17)
    codes = np.array([stationary_resample_1d(3, 1.0, rng) @ [9, 3, 1] for _ in range(100_000)])
    assert stats.chisquare(np.bincount(codes, minlength=27)).pvalue > 1e-3


def test_gamma_star_support():
    ind = (np.random.default_rng(18).random((8, 8)) < 0.5).astype(int)
    e = ex_field(ind, p0=0.25)
    for k in range(20):
        star = bootstrapped_extremogram(e, bootstrap_lattice(8, 0.3, make_rng(19, k)), 3)
        assert np.all(star.values >= 0) and np.all(star.values <= 4.0)
