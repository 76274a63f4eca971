"""Threshold design for the single-threshold detector ``y <= eta -> H0``."""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "DetectorSpec",
    "fixed_threshold",
    "maxmin_threshold",
    "np_threshold",
    "q_function",
    "inv_q",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)

# rational approximation of the standard normal quantile (Acklam)
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549671010584010e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


@dataclass(frozen=True)
class DetectorSpec:
    """Threshold ``base_threshold + np_coefficient * sqrt(mu)``.

    ``np_coefficient`` is zero for fixed thresholds.
    """

    base_threshold: float
    np_coefficient: float = 0.0
    criterion: str = "fixed"

    def threshold(self, mu):
        return self.base_threshold + self.np_coefficient * math.sqrt(mu)

    def decide(self, y, mu):
        """True where the detector picks H1."""
        return y > self.threshold(mu)

    def to_dict(self):
        return {"base_threshold": self.base_threshold,
                "np_coefficient": self.np_coefficient,
                "criterion": self.criterion}


def fixed_threshold(eta):
    return DetectorSpec(float(eta), 0.0, "fixed")


def q_function(x):
    """Standard normal complementary CDF."""
    return 0.5 * math.erfc(x / _SQRT2)


def _normal_quantile_guess(p):
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        return num / den
    if p > 1.0 - _P_LOW:
        return -_normal_quantile_guess(1.0 - p)
    q = p - 0.5
    r = q * q
    num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    return num / den


def inv_q(p):
    """Return ``x`` with ``Q(x) = p``.

    Rational initial guess followed by two Newton steps on ``Q``.
    """
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"inv_q needs p in (0, 1), got {p}")
    if p == 0.5:
        return 0.0
    x = -_normal_quantile_guess(p)
    for _ in range(2):
        density = _INV_SQRT2PI * math.exp(-0.5 * x * x)
        x += (q_function(x) - p) / density
    return x


def maxmin_threshold(solver, tol=1e-10):
    """Threshold balancing the two exponents, ``Omega_0(eta) = Omega_1(eta)``.

    Also the optimiser of the Bayesian exponent, which is set by the smaller
    of the two exponents whatever the priors.
    """
    lo, hi = solver.mean(0), solver.mean(1)
    if not lo < hi:
        raise ValueError("model must satisfy E0 x < E1 x")

    def diff(eta):
        return (solver.fenchel_legendre(0, eta).value
                - solver.fenchel_legendre(1, eta).value)

    eta = 0.5 * (lo + hi)
    for _ in range(200):
        eta = 0.5 * (lo + hi)
        d = diff(eta)
        if abs(d) <= 0.01 * tol or not lo < eta < hi:
            break
        if d < 0.0:
            lo = eta
        else:
            hi = eta
    return DetectorSpec(eta, 0.0, "maxmin")


def np_threshold(model, alpha_bar, S):
    """Neyman-Pearson threshold pinning the false-alarm rate at ``alpha_bar``.

    ``eta_mu = E0 x + sqrt(mu var0 / (2S)) Q^{-1}(alpha_bar)``.
    """
    if not 0.0 < alpha_bar < 1.0:
        raise ValueError(f"alpha_bar must lie in (0, 1), got {alpha_bar}")
    m0, var0 = model.mean_variance(0)
    m1, _ = model.mean_variance(1)
    if not m0 < m1:
        raise ValueError("model must satisfy E0 x < E1 x")
    coef = math.sqrt(var0 / (2.0 * S)) * inv_q(alpha_bar)
    return DetectorSpec(m0, coef, "neyman_pearson")
