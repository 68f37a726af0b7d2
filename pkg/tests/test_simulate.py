import math

import numpy as np
import pytest
from scipy import stats

from gaussmax import (
    CirculantSampler,
    DenseSampler,
    GridSpec,
    ModelError,
    SampleBatch,
    apply_variance,
    circulant_sample_1d,
    circulant_sample_2d,
    dense_sample,
)
from gaussmax.simulate import block_rng, make_sampler

from conftest import power_model


def cov_z(batch, R, pairs):
    """Standardized gaps between empirical and exact covariances."""
    x = batch.values - batch.values.mean(axis=0)
    n = x.shape[0]
    out = []
    for i, j in pairs:
        prod = x[:, i] * x[:, j]
        out.append((prod.mean() - R[i, j]) / (prod.std(ddof=1) / math.sqrt(n)))
    return np.array(out)


def test_grid_contains_origin():
    g = GridSpec.regular([-1.0], [1.0], 0.3)
    assert np.any(g.axes[0] == 0.0)
    assert g.points[g.origin_index][0] == 0.0
    g2 = GridSpec.from_counts([0.0, -1.0], [1.0, 1.0], [11, 21])
    assert g2.index_of([0.0, 0.0]) is not None


def test_single_point_standard_normal():
    m = power_model([2.0], [2.0])
    b = dense_sample(m, GridSpec.single([0.0]), 100_000, seed=1)
    v = b.values[:, 0]
    assert abs(v.var(ddof=1) - 1) < 3 * math.sqrt(2 / v.size)
    assert b.values.shape == (100_000, 1) and np.isfinite(b.values).all()


def test_dense_covariance_5x5():
    m = power_model([1.0, 2.0], [1.5, 2.0], c=0.3)
    g = GridSpec.from_counts([-1.0, -1.0], [1.0, 1.0], [5, 5])
    b = dense_sample(m, g, 100_000, seed=2)
    R = m.covariance_matrix(g.points)
    rng = np.random.default_rng(0)
    z = cov_z(b, R, rng.integers(0, 25, size=(40, 2)))
    assert np.max(np.abs(z)) < 4.0  # largest of 40 gaps
    assert np.mean(np.abs(z) < 3) > 0.9


def test_stationary_mean_zero():
    m = power_model([1.5])
    b = dense_sample(m, GridSpec.regular([-1.0], [1.0], 0.25), 100_000, seed=3)
    se = b.values.std(axis=0, ddof=1) / math.sqrt(b.reps)
    assert np.all(np.abs(b.values.mean(axis=0)) < 3.5 * se)


def test_circulant_gaussian_kernel_no_clipping():
    m = power_model([2.0], lo=[-1.0], hi=[1.0])
    g = GridSpec.from_counts([0.0], [1.0], [2048])
    s = CirculantSampler(m, g, apply_sigma=False)
    assert s.info["clipping_mass"] == 0.0


def test_circulant_lag_correlation():
    m = power_model([2.0])
    g = GridSpec.regular([0.0], [1.0], 0.01)
    b = circulant_sample_1d(m, g, 100_000, seed=4)
    x = b.values
    prod = x[:, 0] * x[:, 1]
    se = prod.std(ddof=1) / math.sqrt(prod.size)
    assert abs(prod.mean() - math.exp(-1e-4)) < 3 * se


def test_circulant_vs_dense_ks():
    m = power_model([1.0])
    g = GridSpec.from_counts([0.0], [1.0], [256])
    a = circulant_sample_1d(m, g, 20_000, seed=5).values
    b = dense_sample(m, g, 20_000, seed=6).values
    crit = 1.628 * math.sqrt(2 / 20_000)  # two-sample 1% critical value
    for k in (0, 17, 128, 255):
        assert stats.ks_2samp(a[:, k], b[:, k]).statistic < crit


def test_circulant_2d_covariance():
    # the exponential kernel embeds at minimal size; a Gaussian one on a short range needs doublings
    m = power_model([1.0, 1.0], lo=[-1, -1], hi=[1, 1])
    g = GridSpec.from_counts([0.0, 0.0], [0.5, 0.5], [6, 5])
    s = CirculantSampler(m, g, apply_sigma=False)
    assert s.info["doublings"] == 0 and s.info["clipping_mass"] == 0.0
    b = circulant_sample_2d(m, g, 40_000, seed=7)
    R = m.covariance_matrix(g.points)
    z = cov_z(b, R, [(0, 1), (0, 5), (3, 29), (7, 7), (12, 18)])
    assert np.max(np.abs(z)) < 3.5


def test_apply_variance():
    m = power_model([2.0], [2.0], c=0.5)
    g = GridSpec.regular([-1.0], [1.0], 0.5)
    b0 = circulant_sample_1d(m, g, 100_000, seed=8)
    b = apply_variance(b0, m)
    k0 = g.origin_index
    assert np.array_equal(b.values[:, k0], b0.values[:, k0])
    s2 = m.sigma2(g.points)
    se = s2 * math.sqrt(2 / b.reps)
    assert np.all(np.abs(b.values.var(axis=0, ddof=1) - s2) < 3.5 * se)
    flat = power_model([2.0])
    assert np.array_equal(apply_variance(b0, flat).values, b0.values)


def test_determinism_and_threads():
    m = power_model([1.5], [1.0])
    g = GridSpec.regular([-1.0], [1.0], 0.05)
    a = dense_sample(m, g, 10_000, seed=9)
    b = dense_sample(m, g, 10_000, seed=9, workers=3)
    assert np.array_equal(a.values, b.values)
    c = CirculantSampler(m, g).sample(5000, 9).values
    assert np.array_equal(c, CirculantSampler(m, g).sample(5000, 9, workers=2).values)


@pytest.mark.parametrize("cls", [DenseSampler, CirculantSampler])
def test_antithetic_negation(cls):
    m = power_model([1.0])
    g = GridSpec.regular([-1.0], [1.0], 0.1)
    v = cls(m, g).sample(4096, 10, antithetic=True).values
    assert np.array_equal(v[1024:2048], -v[:1024])


def test_kronecker_matches_full():
    m = power_model([1.0, 2.0], [None, None])
    g = GridSpec.from_counts([0.0, 0.0], [1.0, 1.0], [7, 6])
    fast = DenseSampler(m, g, kronecker=True)
    full = DenseSampler(m, g, kronecker=False)
    R = m.covariance_matrix(g.points)
    for s, seed in ((fast, 11), (full, 12)):
        z = cov_z(s.sample(60_000, seed), R, [(0, 1), (0, 6), (5, 40), (20, 21), (41, 41)])
        assert np.max(np.abs(z)) < 3.5


def test_dump_round_trip(tmp_path):
    m = power_model([2.0])
    g = GridSpec.regular([-1.0], [1.0], 0.25)
    b = dense_sample(m, g, 50, seed=13)
    p = tmp_path / "batch.f8"
    b.dump(p)
    assert p.stat().st_size == 50 * g.size * 8
    back = SampleBatch.load(p)
    assert np.array_equal(back.values, b.values) and back.seed == 13


def test_bad_grids():
    m = power_model([2.0])
    with pytest.raises(ModelError):
        DenseSampler(m, GridSpec.regular([-2.0], [1.0], 0.5))
    with pytest.raises(ModelError):
        make_sampler(m, GridSpec.regular([-1.0], [1.0], 0.5), "fancy")


def test_block_streams_independent():
    a = block_rng(1, 0).standard_normal(5)
    assert not np.array_equal(a, block_rng(1, 1).standard_normal(5))
    assert not np.array_equal(a, block_rng(1, 0, stream=1).standard_normal(5))
    assert np.array_equal(a, block_rng(1, 0).standard_normal(5))
