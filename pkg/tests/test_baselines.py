import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from numldp.baselines import (
    BinningConfig,
    PmParams,
    SrParams,
    cfo_binning_pipeline,
    estimate_unit_mean,
    from_pm1,
    mean_estimate,
    pm_perturb,
    split_users,
    sr_perturb,
    to_pm1,
    variance_protocol,
)
from numldp.core import BucketSpec, DegenerateError, DomainError, as_params, bucket_of, histogram, make_rng
from numldp.metrics import wasserstein
from numldp.oracles import cfo_aggregate, cfo_perturb, norm_sub


class TestScaling:
    @given(st.floats(0, 1))
    def test_round_trip(self, v):
        assert from_pm1(to_pm1(v)) == pytest.approx(v)

    def test_endpoints(self):
        assert to_pm1(0.0) == -1 and to_pm1(1.0) == 1


class TestSr:
    def test_probabilities(self):
        sr = SrParams(as_params(1.0))
        assert sr.p == pytest.approx(np.e / (np.e + 1))
        assert sr.p + sr.q == pytest.approx(1.0)

    def test_two_outputs(self):
        out = sr_perturb(np.linspace(-1, 1, 50), 2.0, make_rng(0))
        sr = SrParams(as_params(2.0))
        np.testing.assert_allclose(np.abs(out), 1 / (sr.p - sr.q))

    @pytest.mark.parametrize("v", [-1.0, -0.3, 0.0, 0.8, 1.0])
    def test_unbiased(self, v):
        n = 200_000
        out = sr_perturb(np.full(n, v), 1.0, make_rng(1))
        assert abs(out.mean() - v) < 4 * out.std() / np.sqrt(n)

    def test_zero_is_a_fair_coin(self):
        sr = SrParams(as_params(1.0))
        assert sr.q + (sr.p - sr.q) * 0.5 == pytest.approx(0.5)
        out = sr_perturb(np.zeros(100_000), sr, make_rng(9))
        assert abs(np.mean(out > 0) - 0.5) < 4 * np.sqrt(0.25 / out.size)

    def test_noiseless_limit(self):
        v = np.array([-1.0, 0.3, 1.0])
        hits = np.mean([sr_perturb(v, float("inf"), make_rng(i)) > 0 for i in range(20_000)], axis=0)
        np.testing.assert_allclose(hits, (1 + v) / 2, atol=0.02)

    def test_domain(self):
        with pytest.raises(DomainError):
            sr_perturb([1.5], 1.0, make_rng(0))


class TestPm:
    def test_high_region_at_minus_one(self):
        pm = PmParams(as_params(1.0))
        assert pm.left(-1.0) == pytest.approx(-pm.s)
        assert pm.right(-1.0) == pytest.approx(-1.0)

    @pytest.mark.parametrize("eps", [0.5, 1.0, 4.0])
    def test_density_accounts_for_all_mass(self, eps):
        pm = PmParams(as_params(eps))
        for v in (-1.0, 0.0, 0.6):
            width = pm.right(v) - pm.left(v)
            assert pm.high_density * width == pytest.approx(pm.high_mass)
            assert pm.low_density * (2 * pm.s - width) == pytest.approx(1 - pm.high_mass)
        assert pm.high_density / pm.low_density == pytest.approx(np.exp(eps))

    @pytest.mark.parametrize("v", [-1.0, 0.25, 1.0])
    def test_support_and_high_mass(self, v):
        pm = PmParams(as_params(1.0))
        n = 100_000
        out = pm_perturb(np.full(n, v), pm, make_rng(2))
        assert out.min() >= -pm.s and out.max() <= pm.s
        inside = np.mean((out >= pm.left(v)) & (out <= pm.right(v)))
        assert abs(inside - pm.high_mass) < 4 * np.sqrt(pm.high_mass * (1 - pm.high_mass) / n)

    @pytest.mark.parametrize("v", [-1.0, -0.5, 0.0, 0.9])
    def test_unbiased(self, v):
        n = 200_000
        out = pm_perturb(np.full(n, v), 1.0, make_rng(3))
        assert abs(out.mean() - v) < 4 * out.std() / np.sqrt(n)

    def test_outer_region_is_uniform(self):
        pm = PmParams(as_params(1.0))
        out = pm_perturb(np.zeros(200_000), pm, make_rng(4))
        lo, hi = pm.left(0.0), pm.right(0.0)
        left = np.mean(out < lo)
        right = np.mean(out > hi)
        # equal lengths on both sides when v = 0
        assert abs(left - right) < 4 * np.sqrt(2 * left / out.size)


class TestMean:
    def test_mean_estimate(self):
        assert mean_estimate([1.0, 2.0, 6.0]) == 3.0
        assert mean_estimate([0.4]) == 0.4
        assert mean_estimate([-1.0, 1.0]) == 0.0
        with pytest.raises(DegenerateError):
            mean_estimate([])

    @pytest.mark.parametrize("mechanism", ["sr", "pm"])
    def test_unit_mean(self, mechanism):
        v = make_rng(5).beta(5, 2, size=100_000)
        est = estimate_unit_mean(v, mechanism, 2.0, make_rng(6))
        assert est == pytest.approx(v.mean(), abs=0.01)

    def test_unknown_mechanism(self):
        with pytest.raises(DomainError):
            estimate_unit_mean([0.5], "laplace", 1.0, make_rng(0))


class TestVarianceProtocol:
    @given(st.integers(2, 500), st.integers(0, 1000))
    def test_split_sizes(self, n, seed):
        a, b = split_users(n, make_rng(seed))
        assert a.size == n // 2 and b.size == n - n // 2
        assert sorted(np.concatenate([a, b]).tolist()) == list(range(n))

    @pytest.mark.parametrize("mechanism", ["sr", "pm"])
    def test_constant_data_has_no_variance(self, mechanism):
        mu, var = variance_protocol(np.full(20_000, 0.5), mechanism, 30.0, make_rng(7))
        assert mu == pytest.approx(0.5, abs=0.02)
        assert var < 1e-3

    @pytest.mark.parametrize("mechanism", ["sr", "pm"])
    def test_beta_variance(self, mechanism):
        v = make_rng(8).beta(5, 2, size=100_000)
        mu, var = variance_protocol(v, mechanism, 4.0, make_rng(9))
        assert mu == pytest.approx(v.mean(), abs=0.01)
        assert abs(var - v.var()) < 0.5 * v.var()

    def test_too_few_users(self):
        with pytest.raises(DegenerateError):
            variance_protocol([0.3], "sr", 1.0, make_rng(0))


class TestBinning:
    def test_config_checked(self):
        with pytest.raises(DomainError):
            BinningConfig(c=3, d=16)

    def test_full_resolution_is_plain_cfo(self):
        d, eps = 32, 1.0
        v = make_rng(10).beta(2, 2, size=5000)
        got = cfo_binning_pipeline(v, BinningConfig(d, d), eps, make_rng(11))
        idx = bucket_of(v, BucketSpec(0, 1, d))
        want = norm_sub(cfo_aggregate(cfo_perturb(idx, d, eps, make_rng(11))))
        np.testing.assert_allclose(got, want)

    def test_noiseless_point_mass_spreads_uniformly(self):
        got = cfo_binning_pipeline(np.full(100, 0.3), BinningConfig(4, 16), float("inf"), make_rng(0))
        want = np.zeros(16)
        want[4:8] = 0.25
        np.testing.assert_allclose(got, want, atol=1e-12)

    def test_single_bin_is_uniform(self):
        got = cfo_binning_pipeline(make_rng(1).random(10), BinningConfig(1, 8), 1.0, make_rng(2))
        np.testing.assert_allclose(got, np.full(8, 1 / 8))

    def test_coarse_bins_help_at_low_budget(self):
        d, eps = 256, 0.5
        errs = {16: [], 64: []}
        for seed in range(5):
            v = make_rng(seed, 1).beta(5, 2, size=20_000)
            truth = histogram(v, d)
            for c in errs:
                est = cfo_binning_pipeline(v, BinningConfig(c, d), eps, make_rng(seed, 2))
                errs[c].append(wasserstein(truth, est))
        assert np.mean(errs[16]) < np.mean(errs[64])
