import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffusion_ld.analysis import (ErrorRate, MonteCarloEstimate, bayes_error,
                                   empirical_exponent, exponent_convergence, ks_distance_normal,
                                   normality_diagnostics, wilson_interval)
from diffusion_ld.engine import SimulationConfig, steady_state_samples
from diffusion_ld.network import uniform_matrix

from conftest import EXAMPLES


def _estimate(alpha_counts, beta_counts, n=1000, mu=0.01):
    return MonteCarloEstimate(mu, 0.0, 1, ErrorRate(np.array(alpha_counts), n, mu),
                              ErrorRate(np.array(beta_counts), n, mu))


class TestBayesError:
    def test_arithmetic(self):
        assert bayes_error((0.01, 0.04), 0.3, 0.7) == pytest.approx(0.031, abs=1e-15)

    def test_prior_one_returns_alpha(self):
        est = _estimate([3, 7], [50, 60])
        np.testing.assert_array_equal(bayes_error(est, 1.0, 0.0), est.alpha.raw)

    def test_symmetric_case(self):
        assert bayes_error((0.2, 0.2), 0.5, 0.5) == pytest.approx(0.2)

    @pytest.mark.parametrize("priors", [(0.6, 0.6), (-0.1, 1.1)])
    def test_bad_priors(self, priors):
        with pytest.raises(ValueError):
            bayes_error((0.1, 0.1), *priors)


class TestWilson:
    def test_contains_estimate(self):
        lo, hi = wilson_interval(30, 1000)
        assert lo < 0.03 < hi

    def test_endpoints_pinned(self):
        lo, hi = wilson_interval(np.array([0, 10]), 10)
        assert lo[0] == 0.0 and hi[1] == 1.0

    def test_coverage(self):
        # nominal 95%; Wilson is close to nominal even for small p
        rng = np.random.default_rng(0)
        p, n = 0.02, 500
        k = rng.binomial(n, p, size=1000)
        lo, hi = wilson_interval(k, n)
        assert np.mean((lo <= p) & (p <= hi)) >= 0.93

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(1, 10**6), frac=st.floats(0, 1))
    def test_ordered_in_unit_interval(self, n, frac):
        k = int(frac * n)
        lo, hi = wilson_interval(k, n)
        assert 0.0 <= lo <= k / n <= hi <= 1.0


class TestErrorRate:
    def test_zero_counts_are_flagged_upper_bounds(self):
        r = ErrorRate(np.array([0, 5]), 1000, 0.01)
        np.testing.assert_array_equal(r.flagged, [True, False])
        np.testing.assert_allclose(r.p_hat, [1e-3, 5e-3])
        assert r.exponent[0] == pytest.approx(-0.01 * math.log(1e-3))

    def test_rows_flag_bits(self):
        rows = _estimate([0, 1, 0], [2, 0, 0]).rows()
        assert [r["zero_count_flag"] for r in rows] == [1, 2, 3]

    def test_exponent_of_one_is_zero(self):
        assert empirical_exponent(1.0, 0.3) == 0.0


class TestExponentConvergence:
    SE = 0.04

    def _synthetic(self, c, mus=(0.05, 0.02, 0.01), S=3):
        return [(mu, np.full(S, c * math.exp(-self.SE / mu))) for mu in mus]

    def test_exact_inverse_has_zero_gap(self):
        rep = exponent_convergence(self._synthetic(1.0), self.SE)
        np.testing.assert_allclose(rep.gaps, 0.0, atol=1e-12)

    def test_prefactor_gap_vanishes_with_mu(self):
        mus = (0.05, 0.02, 0.01, 0.005)
        rep = exponent_convergence(self._synthetic(5.0, mus), self.SE)
        expected = -np.array(mus) * math.log(5.0) / self.SE
        np.testing.assert_allclose(rep.gaps[:, 0], expected, rtol=1e-10)
        assert rep.gap_decreasing
        assert not rep.inconclusive

    def test_flagged_entries_are_nan(self):
        rep = exponent_convergence([(0.05, [0.0, 1e-3]), (0.01, [1e-2, 1e-2])], self.SE)
        assert math.isnan(rep.gaps[0, 0]) and not math.isnan(rep.gaps[0, 1])

    def test_all_flagged_is_inconclusive(self):
        rep = exponent_convergence([(0.05, [1e-3, 1e-3]), (0.01, [0.0, 0.0])], self.SE)
        assert rep.inconclusive and not rep.gap_decreasing

    def test_from_estimates_by_kind(self):
        ests = [_estimate([100, 120], [90, 80], mu=0.05), _estimate([10, 12], [0, 9], mu=0.02)]
        beta = exponent_convergence(ests, self.SE, kind="beta")
        assert beta.flagged.tolist() == [[False, False], [True, False]]
        # the zero count keeps its 1/R floor, so the exponent is a lower bound
        assert beta.empirical[1, 0] == pytest.approx(-0.02 * math.log(1e-3))
        bayes = exponent_convergence(ests, self.SE)
        assert bayes.empirical[1, 0] == pytest.approx(-0.02 * math.log(0.005))

    def test_needs_two_step_sizes(self):
        with pytest.raises(ValueError):
            exponent_convergence([(0.01, [0.1])], self.SE)

    def test_to_dict_replaces_nan(self):
        d = exponent_convergence([(0.05, [0.0]), (0.01, [1e-2])], self.SE).to_dict()
        assert d["gaps"][0] == [None]


class TestNormality:
    def test_null_calibration(self):
        N = 10_000
        z = np.random.default_rng(1).standard_normal((N, 2))
        # mu var / (2S) = 1 with mu = 0.5, var = 4, S = 1
        class Unit:
            def mean_variance(self, h):
                return 0.0, 4.0
        rep = normality_diagnostics(z, Unit(), 0, 0.5, 1)
        assert np.all(rep.ks <= 1.36 / math.sqrt(N))
        np.testing.assert_allclose(rep.variance, 1.0, atol=0.05)

    def test_ks_detects_shift(self):
        z = np.random.default_rng(2).standard_normal(5000) + 0.5
        assert ks_distance_normal(z) > 0.15

    def test_ks_tiny_sample_exact(self):
        assert ks_distance_normal([0.0]) == pytest.approx(0.5)

    def test_too_few_draws(self):
        with pytest.raises(ValueError):
            normality_diagnostics(np.zeros(10), None, 0, 0.1, 1)

    def test_small_step_is_more_normal(self):
        # Bernoulli LLR is two-valued; the steady state looks Gaussian only as mu -> 0
        model, S = EXAMPLES["bernoulli_llr"], 2
        out = {}
        for mu in (0.02, 0.6):
            cfg = SimulationConfig(mu=mu, replications=20_000, master_seed=3)
            y = steady_state_samples(model, 0, uniform_matrix(S), cfg)
            out[mu] = normality_diagnostics(y, model, 0, mu, S)
        assert out[0.02].ks.max() < out[0.6].ks.min()
        big = abs(out[0.6].variance - 1).max()
        assert abs(out[0.02].variance - 1).max() < big

    def test_to_dict(self):
        z = np.random.default_rng(0).standard_normal(2000)
        d = normality_diagnostics(z, None, 0, 2.0, 1).to_dict()
        assert set(d) == {"mean", "variance", "skewness", "ks", "n"} and d["n"] == 2000
