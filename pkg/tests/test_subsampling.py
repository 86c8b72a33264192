import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cointsub import subsampling as S
from cointsub.errors import DebiasError, DistributionError, UsageError
from cointsub.kernel import BandwidthRule
from cointsub.teststats import WeightWindow, mhm_normalize, mhm_statistic, snu_statistic


def _path(n, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    shocks = scale * rng.normal(size=n)
    return np.cumsum(shocks), rng.normal(size=n), shocks


def test_build_blocks_examples():
    x, u, shocks = _path(5)
    blocks = S.build_blocks(x, u, 2)
    assert len(blocks) == 4
    np.testing.assert_array_equal(blocks[2].x, [x[2] - x[1], x[3] - x[1]])
    full = S.build_blocks(x, u, 5, 1)
    np.testing.assert_array_equal(full[0].x, x)
    with pytest.raises(UsageError):
        S.build_blocks(x, u, 2, 5)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 30))
def test_reset_regressors_are_shock_sums(seed, b):
    x, u, shocks = _path(40, seed)
    for blk in S.build_blocks(x, u, b):
        i = blk.start - 1
        np.testing.assert_allclose(blk.x, np.cumsum(shocks[i:i + b]), rtol=1e-12, atol=1e-12)


def test_subsample_snu_block_identity():
    x, u, _ = _path(70, 3)
    h = 70 ** (-1 / 3)
    dist = S.subsample_snu(x, u, 70, 1, BandwidthRule.fixed(h))
    full = snu_statistic(u, x, h).z
    assert abs(dist.values[0] - full) <= 1e-12 * abs(full)


@pytest.mark.parametrize("b", [2, 10, 25])
def test_subsample_snu_matches_bruteforce(b):
    x, u, _ = _path(60, b)
    fast = S.subsample_snu(x, u, b).raw
    slow = S.subsample_snu_bruteforce(x, u, b)
    np.testing.assert_allclose(fast, slow, rtol=1e-11, atol=1e-12)


def test_subsample_snu_zero_residuals():
    x, _, _ = _path(30)
    with pytest.raises(DistributionError):
        S.subsample_snu(x, np.zeros(30), 5)


def test_subsample_snu_skip_accounting():
    x, u, _ = _path(100, 1)
    u = u.copy()
    u[10:13] = 0.0  # every length-2 block touching the zero run has S = 0
    dist = S.subsample_snu(x, u, 2)
    assert dist.skipped == 4 and dist.attempted == 99 and dist.M == 95
    u[40:50] = 0.0
    with pytest.raises(DistributionError):
        S.subsample_snu(x, u, 2)


def test_subsample_mhm_block_identity():
    x, u, _ = _path(60, 5)
    h = 60 ** (-1 / 3)
    w = WeightWindow(-100, 100)
    dist = S.subsample_mhm(x, u, 60, 1, BandwidthRule.fixed(h), "LM", 0.1, 0.0, w)
    full = mhm_normalize(mhm_statistic(u, x, h, w, method="exact"), 60, h, "LM", 0.1)
    assert abs(dist.values[0] / full - 1) <= 1e-12


@pytest.mark.parametrize("window", [WeightWindow(), WeightWindow(-2.0, 3.0)])
def test_subsample_mhm_matches_bruteforce(window):
    x, u, _ = _path(60, 8)
    b = 10
    h_b = 10 ** (-1 / 3)
    fast = S.subsample_mhm(x, u, b, window=window).raw
    scale = S.scaling_dn("LM", b, 0.1) / (b * h_b)
    slow = [mhm_statistic(blk.u, blk.x, h_b, window, method="exact") * scale
            for blk in S.build_blocks(x, u, b)]
    np.testing.assert_allclose(fast, slow, rtol=1e-10, atol=1e-14)
    quad = [mhm_statistic(blk.u, blk.x, h_b, window, grid_points=20001) * scale
            for blk in S.build_blocks(x, u, b)]
    np.testing.assert_allclose(fast, quad, rtol=1e-6, atol=1e-12)


def test_subsample_mhm_zero_residuals():
    x, _, _ = _path(30)
    dist = S.subsample_mhm(x, np.zeros(30), 6)
    assert dist.M == 25 and np.all(dist.values == 0)


def test_pvalues_hand_counts():
    vals = np.array([-2.0, -1.0, -0.5, 0.1, 0.3, 0.7, 1.2, 1.9, 2.5, 3.0])
    dist = S.SubsampleDistribution(np.sort(vals), 5, 10, 0.5)
    assert S.pvalue_snu(1.0, dist) == 0.5
    assert S.pvalue_snu(10.0, dist) == 0.0
    assert S.pvalue_snu(0.0, dist) == 1.0
    assert S.pvalue_mhm(0.7, dist) == 0.4
    assert S.pvalue_mhm(-5.0, dist) == 1.0
    assert S.pvalue_mhm(5.0, dist) == 0.0


def test_cdf_properties():
    x, u, _ = _path(80, 2)
    dist = S.subsample_snu(x, u, 12)
    ts = np.linspace(-5, 5, 301)
    c = np.array([dist.cdf(t) for t in ts])
    assert np.all(np.diff(c) >= 0) and c.min() >= 0 and c.max() <= 1
    v = dist.values[3]
    assert dist.cdf(v) == dist.cdf(v + 1e-300) >= dist.cdf(np.nextafter(v, -np.inf))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-2, 1e2))
def test_pvalue_snu_scale_invariant(seed, c):
    x, u, _ = _path(50, seed)
    z = snu_statistic(u, x, 50 ** (-1 / 3)).z
    p1 = S.pvalue_snu(z, S.subsample_snu(x, u, 8))
    zc = snu_statistic(c * u, x, 50 ** (-1 / 3)).z
    p2 = S.pvalue_snu(zc, S.subsample_snu(x, c * u, 8))
    assert p1 == p2


def test_loglog_line_exact():
    slope, icpt = S.loglog_line(20, 0.8, 30, 0.5)
    assert math.isclose(icpt + slope * math.log(20), math.log(0.8), rel_tol=1e-14)
    assert math.isclose(icpt + slope * math.log(30), math.log(0.5), rel_tol=1e-14)
    flat = S.loglog_line(20, 0.4, 30, 0.4)
    assert flat[0] == 0.0 and math.isclose(math.exp(flat[1]), 0.4)
    with pytest.raises(DebiasError):
        S.loglog_line(20, 0.0, 30, 0.4)


def test_debias_report_interpolates_calibration_points():
    x, u, _ = _path(400, 11, scale=3.0)
    rep = S.debias_mhm(x, u, "LM", 0.1, blocks=(10, 20))
    assert (rep.b1, rep.b2) == (60, 80)
    assert math.isclose(rep.predict_log_bias(rep.b1), math.log(rep.bias_b1), rel_tol=1e-12, abs_tol=1e-12)
    assert math.isclose(rep.predict_log_bias(rep.b2), math.log(rep.bias_b2), rel_tol=1e-12, abs_tol=1e-12)
    assert math.isclose(rep.bias_n, math.exp(rep.predict_log_bias(400)), rel_tol=1e-12)
    assert math.isclose(rep.debiased_statistic, rep.statistic - rep.bias_n)
    assert set(rep.pvalues) == {10, 20}
    for b, p in rep.pvalues.items():
        d = S.subsample_mhm(x, u, b)
        centred = d.values - d.mean()
        assert p == np.count_nonzero(centred > rep.debiased_statistic) / d.M


def test_debias_power_law_bias_is_recovered():
    # means following C b^a give the extrapolated C N^a exactly
    c, a, n = 0.7, -0.35, 400
    b1, b2 = S.debias_blocks(n)
    slope, icpt = S.loglog_line(b1, c * b1 ** a, b2, c * b2 ** a)
    assert math.isclose(slope, a, rel_tol=1e-12)
    assert math.isclose(math.exp(icpt + slope * math.log(n)), c * n ** a, rel_tol=1e-12)


def test_block_scan_single_point_and_gaps():
    x, u, _ = _path(60, 4)
    bs, ps = S.block_scan(x, u, u, "snu", [9])
    z = snu_statistic(u, x, 60 ** (-1 / 3)).z
    assert ps[0] == S.pvalue_snu(z, S.subsample_snu(x, u, 9))
    with pytest.raises(UsageError):
        S.block_scan(x, u, u, "snu", [1, 2])
    with pytest.raises(DistributionError):
        S.block_scan(x, np.zeros(60), np.zeros(60), "snu", [4, 5])


def test_block_scan_null_vs_alternative():
    rng = np.random.default_rng(0)
    null_p, alt_p = [], []
    from cointsub.models import fit, residuals
    for rep in range(10):
        x = np.cumsum(rng.normal(size=200))
        u = rng.normal(size=200)
        for y, store in ((x + 0.2 * u, null_p), (x + 0.1 * x * x + 0.2 * u, alt_p)):
            res = residuals(fit("linear", x, y), x, y)
            store.append(S.block_scan(x, res, res, "snu", [40, 50, 56])[1])
    assert np.mean(np.max(alt_p, axis=1) < 0.05) >= 0.8
    assert np.mean(null_p) > 0.2


def test_minimal_volatility():
    b = np.arange(10, 20)
    assert S.minimal_volatility(b, np.full(10, 0.3)) == 12
    p = np.array([0.9, 0.1, 0.7, 0.4, 0.4, 0.4, 0.4, 0.4, 0.9, 0.05])
    assert S.minimal_volatility(b, p) == 15
    assert S.minimal_volatility([4, 5, 6], [0.1, 0.5, 0.2], window=3) == 5
    with pytest.raises(UsageError):
        S.minimal_volatility([4, 5], [0.1, 0.2])
    gap = np.array([0.3, np.nan, 0.3, 0.3, 0.3, 0.2, 0.3, 0.1, 0.5, 0.4])
    assert S.minimal_volatility(b, gap) in b


def test_determinism():
    x, u, _ = _path(90, 6)
    a = S.subsample_mhm(x, u, 20)
    b = S.subsample_mhm(x, u, 20)
    np.testing.assert_array_equal(a.values, b.values)
