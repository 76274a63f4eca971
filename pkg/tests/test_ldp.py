import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffusion_ld import models
from diffusion_ld._numerics import QuadratureError
from diffusion_ld.design import fixed_threshold
from diffusion_ld.ldp import RateFunctionSolver, exponents, fenchel_legendre, np_type2_exponent, omega

from conftest import EXAMPLES
from oracles import grid_search_transform, quad_omega, simpson_omega

D = 0.5


@pytest.fixture(scope="module")
def gauss():
    return RateFunctionSolver(EXAMPLES["gaussian_llr"])


@pytest.fixture(scope="module")
def bern():
    return RateFunctionSolver(EXAMPLES["bernoulli_llr"])


class TestOmega:
    def test_gaussian_zero_at_two(self, gauss):
        assert omega(gauss, 0, 2.0) == pytest.approx(0.0, abs=1e-12)

    def test_zero_at_origin(self, any_model, hyp):
        assert RateFunctionSolver(any_model).omega(hyp, 0.0) == 0.0

    @pytest.mark.parametrize("t", [-5.0, -1.3, 0.7, 3.0, 5.0])
    def test_gaussian_closed_form(self, gauss, t):
        assert gauss.omega(0, t) == pytest.approx(D * t * (t / 2 - 1), abs=1e-10)
        assert gauss.omega(1, t) == pytest.approx(D * t * (t / 2 + 1), abs=1e-10)

    def test_bernoulli_simpson_oracle(self, bern):
        ref = simpson_omega(bern.model, 0, 1.0)
        assert bern.omega(0, 1.0) == pytest.approx(ref, abs=1e-8)

    @pytest.mark.parametrize("t", [-3.0, 0.5, 2.0])
    def test_quadpack_oracle(self, any_model, hyp, t):
        solver = RateFunctionSolver(any_model)
        assert solver.omega(hyp, t) == pytest.approx(quad_omega(any_model, hyp, t), abs=1e-9)

    def test_laplace_across_singularity(self):
        m = EXAMPLES["laplace_llr"]
        solver = RateFunctionSolver(m)
        assert solver.omega(0, 1.0) == pytest.approx(simpson_omega(m, 0, 1.0), abs=1e-8)

    def test_subdivision_cap_raises_with_bound(self):
        solver = RateFunctionSolver(EXAMPLES["gaussian_mixture_raw"], quad_tol=1e-16,
                                    max_subdivisions=2)
        with pytest.raises(QuadratureError) as info:
            solver.omega(0, 50.0)
        assert info.value.error_bound > 0


class TestOmegaShape:
    def test_strict_convexity(self, any_model, hyp):
        solver = RateFunctionSolver(any_model)
        e = 1e-4
        for t in np.linspace(-5, 5, 41):
            up = solver.omega_increment(hyp, t, t + e)
            down = solver.omega_increment(hyp, t - e, t)
            assert (up - down) / e**2 > 0

    def test_slope_at_origin(self, any_model, hyp):
        solver = RateFunctionSolver(any_model)
        assert solver.slope_at_zero(hyp) == pytest.approx(any_model.mean_variance(hyp)[0],
                                                          abs=1e-6)


class TestFenchelLegendre:
    def test_gaussian_at_zero(self, gauss):
        leg = fenchel_legendre(gauss, 0, 0.0)
        assert leg.value == pytest.approx(0.25, abs=1e-12)
        assert leg.argmax == pytest.approx(1.0, abs=1e-10)
        assert leg.status == "interior"

    def test_mean_returns_zero(self, any_model, hyp):
        solver = RateFunctionSolver(any_model)
        leg = solver.fenchel_legendre(hyp, solver.mean(hyp))
        assert (leg.value, leg.argmax, leg.status) == (0.0, 0.0, "mean")

    @pytest.mark.parametrize("g", np.linspace(-2, 2, 9))
    def test_gaussian_closed_form(self, gauss, g):
        assert gauss.fenchel_legendre(0, g).value == pytest.approx((g + D) ** 2 / (2 * D),
                                                                   abs=1e-9)
        assert gauss.fenchel_legendre(1, g).value == pytest.approx((g - D) ** 2 / (2 * D),
                                                                   abs=1e-9)

    def test_bernoulli_grid_search_oracle(self, bern):
        ref, t_ref = grid_search_transform(bern.model, 0, 0.0)
        leg = bern.fenchel_legendre(0, 0.0)
        assert leg.value == pytest.approx(ref, abs=1e-8)
        assert leg.argmax == pytest.approx(t_ref, abs=1e-4)

    def test_bernoulli_outside_domain(self, bern):
        a, b = bern.model.support
        leg = bern.fenchel_legendre(0, a + 0.01)
        assert leg.value == math.inf and leg.argmax is None and leg.status == "outside"
        assert bern.fenchel_legendre(1, b - 0.01).status == "outside"

    def test_capped_bracket_is_distinct_from_outside(self):
        solver = RateFunctionSolver(EXAMPLES["gaussian_llr"], bracket_cap=8.0)
        leg = solver.fenchel_legendre(0, 100.0)
        assert leg.value == math.inf and leg.status == "capped"

    def test_nonfinite_gamma(self, gauss):
        with pytest.raises(ValueError):
            gauss.fenchel_legendre(0, math.nan)

    def test_nonnegative_and_convex(self, any_model, hyp):
        solver = RateFunctionSolver(any_model)
        m0, m1 = solver.mean(0), solver.mean(1)
        grid = np.linspace(m0 - (m1 - m0), m1 + (m1 - m0), 21)
        vals = np.array([solver.fenchel_legendre(hyp, g).value for g in grid])
        assert np.all(vals >= 0)
        assert np.all(vals[1:-1] <= 0.5 * (vals[:-2] + vals[2:]) + 1e-9)

    def test_round_trip(self, any_model, hyp):
        solver = RateFunctionSolver(any_model)
        m0, m1 = solver.mean(0), solver.mean(1)
        for g in np.linspace(m0 - 0.5 * (m1 - m0), m1 + 0.5 * (m1 - m0), 7):
            leg = solver.fenchel_legendre(hyp, g)
            if leg.status != "interior":
                continue
            assert solver.psi_over_t(hyp, leg.argmax) == pytest.approx(
                g, abs=10 * solver.root_tol * max(1.0, abs(g)))

    def test_domain_limits(self, bern):
        lo, hi = bern.domain(0)
        a, b = bern.model.support
        assert lo.value == pytest.approx(b, rel=1e-9) and not lo.capped
        assert hi.value == pytest.approx(a, rel=1e-9) and not hi.capped
        glo, ghi = RateFunctionSolver(EXAMPLES["gaussian_llr"]).domain(0)
        assert glo.capped and ghi.capped

    @settings(max_examples=25, deadline=None)
    @given(theta=st.floats(0.2, 2.0), sigma=st.floats(0.5, 2.0), g=st.floats(-1.5, 1.5))
    def test_gaussian_family_property(self, theta, sigma, g):
        d = theta**2 / (2 * sigma**2)
        solver = RateFunctionSolver(models.GaussianLLR(theta, sigma))
        assert solver.fenchel_legendre(0, g).value == pytest.approx((g + d) ** 2 / (2 * d),
                                                                    abs=1e-8)


class TestExponents:
    def test_gaussian_symmetric_threshold(self, gauss):
        pair = exponents(gauss, fixed_threshold(0.0), 10)
        assert pair.E0 == pytest.approx(0.25, abs=1e-12)
        assert pair.E1 == pytest.approx(0.25, abs=1e-12)
        assert pair.S_E0 == pytest.approx(2.5, abs=1e-11)

    def test_threshold_at_h1_mean(self, gauss):
        assert gauss.exponents(0.5, 10).E1 == 0.0

    def test_threshold_outside_means_nullifies(self, gauss):
        pair = gauss.exponents(-0.8, 10)
        assert pair.E0 == 0.0 and pair.E1 > 0

    def test_mixture_unbalanced_matches_oracle(self):
        m = EXAMPLES["gaussian_mixture_raw"]
        eta = 0.05 / 3
        pair = RateFunctionSolver(m).exponents(eta, 10)
        ref0, _ = grid_search_transform(m, 0, eta)
        ref1, _ = grid_search_transform(m, 1, eta)
        assert pair.E0 == pytest.approx(ref0, abs=1e-8)
        assert pair.E1 == pytest.approx(ref1, abs=1e-8)
        assert abs(pair.E0 - pair.E1) > 1e-6


class TestNeymanPearsonExponent:
    def test_gaussian(self, gauss):
        assert np_type2_exponent(gauss) == pytest.approx(2 * D, abs=1e-10)

    def test_exceeds_symmetric_threshold_exponent(self, any_model):
        if not any_model.is_llr:
            pytest.skip("raw-data family")
        solver = RateFunctionSolver(any_model)
        assert solver.np_type2_exponent() > solver.fenchel_legendre(1, 0.0).value

    def test_laplace_grid_search_oracle(self):
        m = EXAMPLES["laplace_llr"]
        ref, _ = grid_search_transform(m, 1, m.mean_variance(0)[0])
        assert RateFunctionSolver(m).np_type2_exponent() == pytest.approx(ref, abs=1e-8)
