"""Per-hypothesis laws of the statistic exchanged by the sensors.

Four families are supported. Three of them exchange the local log-likelihood
ratio of a raw datum (Gaussian shift, one-bit Bernoulli, Laplace shift); the
fourth exchanges the raw datum of a Gaussian-mixture shift problem as is.

Every model exposes the closed-form LMGF ``psi_h(t) = ln E_h exp(t x)``, the
first two moments, and a vectorised sampler. Models are immutable, so a single
instance can be shared across worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DomainError",
    "StatisticModel",
    "GaussianLLR",
    "BernoulliLLR",
    "LaplaceLLR",
    "GaussianMixtureRaw",
    "FAMILIES",
    "make_model",
    "lmgf",
    "mean_variance",
    "sample",
]

# |t - t_sing| below which the Laplace LMGF switches to its series expansion
LAPLACE_SERIES_RADIUS = 1e-6


class DomainError(ValueError):
    """A model parameter or argument lies outside its admissible range."""


def _check_hypothesis(h):
    if h not in (0, 1):
        raise DomainError(f"hypothesis must be 0 or 1, got {h!r}")


def _as_output(t, value):
    return float(value) if np.ndim(t) == 0 else value


@dataclass(frozen=True)
class StatisticModel:
    """Base class; concrete families override the four hooks below."""

    family: str = field(init=False, default="")

    #: True when the exchanged statistic is the log-likelihood ratio.
    is_llr = False

    def lmgf(self, h, t):
        """Return ``psi_h(t)``; scalar in, float out, array in, array out."""
        _check_hypothesis(h)
        t_arr = np.asarray(t, dtype=float)
        if not np.all(np.isfinite(t_arr)):
            raise DomainError("lmgf argument must be finite")
        return _as_output(t, self._lmgf(h, t_arr))

    def mean_variance(self, h):
        """Return ``(E_h x, VAR_h x)``."""
        _check_hypothesis(h)
        return self._mean_variance(h)

    def sample(self, h, rng, size=None):
        """Draw the statistic under hypothesis ``h``."""
        _check_hypothesis(h)
        out = self._sample(h, rng, 1 if size is None else size)
        return float(out[0]) if size is None else out

    def params(self):
        """Parameter table as it appears in a config file."""
        raise NotImplementedError

    def kl_divergences(self):
        """Return ``(D(H0||H1), D(H1||H0))``; only defined for LLR families."""
        if not self.is_llr:
            raise DomainError(f"{self.family} does not exchange a log-likelihood ratio")
        return -self.mean_variance(0)[0], self.mean_variance(1)[0]

    def _lmgf(self, h, t):
        raise NotImplementedError

    def _mean_variance(self, h):
        raise NotImplementedError

    def _sample(self, h, rng, size):
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianLLR(StatisticModel):
    """LLR of ``N(0, sigma^2)`` versus ``N(theta, sigma^2)``."""

    theta: float = 1.0
    sigma: float = 1.0
    family: str = field(init=False, default="gaussian_llr")
    is_llr = True

    def __post_init__(self):
        if not (self.theta > 0 and self.sigma > 0):
            raise DomainError("gaussian_llr requires theta > 0 and sigma > 0")

    @property
    def divergence(self):
        return self.theta**2 / (2.0 * self.sigma**2)

    def params(self):
        return {"theta": self.theta, "sigma": self.sigma}

    def _lmgf(self, h, t):
        d = self.divergence
        return d * t * (t - 1.0) if h == 0 else d * t * (t + 1.0)

    def _mean_variance(self, h):
        d = self.divergence
        return (-d if h == 0 else d), 2.0 * d

    def _sample(self, h, rng, size):
        d = rng.normal(self.theta * h, self.sigma, size)
        return self.theta / self.sigma**2 * (d - self.theta / 2.0)


@dataclass(frozen=True)
class BernoulliLLR(StatisticModel):
    """LLR of one-bit data, ``B(p0)`` versus ``B(p1)``."""

    p0: float = 0.49
    p1: float = 0.51
    family: str = field(init=False, default="bernoulli_llr")
    is_llr = True

    def __post_init__(self):
        if not (0.0 < self.p0 < 1.0 and 0.0 < self.p1 < 1.0):
            raise DomainError("bernoulli_llr requires p0, p1 in (0, 1)")
        if self.p0 == self.p1:
            raise DomainError("bernoulli_llr requires p0 != p1")

    @property
    def support(self):
        """The two values taken by the LLR: ``(ln p1/p0, ln q1/q0)``."""
        return (math.log(self.p1 / self.p0),
                math.log((1.0 - self.p1) / (1.0 - self.p0)))

    def params(self):
        return {"p0": self.p0, "p1": self.p1}

    def _lmgf(self, h, t):
        lp0, lp1 = math.log(self.p0), math.log(self.p1)
        lq0, lq1 = math.log1p(-self.p0), math.log1p(-self.p1)
        # psi_0(t) = ln(p1^t p0^(1-t) + q1^t q0^(1-t)), psi_1(t) = psi_0(t + 1)
        s = t + h
        return np.logaddexp(s * lp1 + (1.0 - s) * lp0, s * lq1 + (1.0 - s) * lq0)

    def _mean_variance(self, h):
        a, b = self.support
        p = self.p1 if h else self.p0
        return p * a + (1.0 - p) * b, p * (1.0 - p) * (a - b) ** 2

    def _sample(self, h, rng, size):
        a, b = self.support
        p = self.p1 if h else self.p0
        return b + (a - b) * (rng.random(size) < p)


@dataclass(frozen=True)
class LaplaceLLR(StatisticModel):
    """LLR of ``L(0, sigma)`` versus ``L(theta, sigma)`` (Laplace scale ``sigma``)."""

    theta: float = 0.3
    sigma: float = 1.0
    family: str = field(init=False, default="laplace_llr")
    is_llr = True

    def __post_init__(self):
        if not (self.theta > 0 and self.sigma > 0):
            raise DomainError("laplace_llr requires theta > 0 and sigma > 0")

    @property
    def rho(self):
        return self.theta / self.sigma

    def params(self):
        return {"theta": self.theta, "sigma": self.sigma}

    def _lmgf(self, h, t):
        # With u = t + h - 1/2 the closed form
        #   ln((1-t)/(1-2t) e^{-rho t} - t/(1-2t) e^{-rho(1-t)})
        # reads -rho/2 + ln(cosh(rho u) + sinh(rho u)/(2u)); the quotient is
        # 0/0 at u = 0, where the even series in u is used instead.
        rho = self.rho
        u = np.abs(t + h - 0.5)
        a = rho * u
        out = np.empty_like(u)

        near = u < LAPLACE_SERIES_RADIUS
        an = a[near]
        out[near] = np.log(np.cosh(an) + 0.5 * rho * (1.0 + an * an / 6.0))

        mid = ~near & (a <= 30.0)
        am, um = a[mid], u[mid]
        out[mid] = np.log(np.cosh(am) + np.sinh(am) / (2.0 * um))

        far = ~near & (a > 30.0)
        af, uf = a[far], u[far]
        inv = 1.0 / (2.0 * uf)
        out[far] = af - math.log(2.0) + np.log1p(inv + np.exp(-2.0 * af) * (1.0 - inv))
        out -= 0.5 * rho
        # u = 1/2 is t = 0 or the other zero of the LLR LMGF; pin it exactly
        out[u == 0.5] = 0.0
        return out

    def _mean_variance(self, h):
        rho = self.rho
        e = math.exp(-rho)
        m0 = -math.expm1(-rho) - rho  # -(rho + e^{-rho} - 1)
        second = rho * rho + 4.0 - 2.0 * rho - e * (2.0 * rho + 4.0)
        # x under H1 has the law of -x under H0
        return (m0 if h == 0 else -m0), second - m0 * m0

    def _sample(self, h, rng, size):
        # Inverse-CDF draw of the standardised datum; for u >= 1/2 it is
        # -ln(2(1-u)) >= 0, and the LLR clips everything outside [0, rho] to
        # -rho/+rho, so one clipped logarithm covers all of u in (0, 1).
        rho = self.rho
        u = rng.random(size)
        x = np.log(2.0 * (1.0 - u))
        x *= -2.0
        x -= rho
        np.clip(x, -rho, rho, out=x)
        # under H1, theta - d has the H0 law and maps x to -x
        return -x if h == 1 else x


@dataclass(frozen=True)
class GaussianMixtureRaw(StatisticModel):
    """Raw datum of a balanced two-component Gaussian mixture shifted by ``theta``.

    Component means are ``theta*h + theta0`` (std ``sigma1``) and
    ``theta*h - theta0`` (std ``sigma2``).
    """

    theta: float = 0.05
    theta0: float = 1.0
    sigma1: float = 1.0
    sigma2: float = 0.3
    family: str = field(init=False, default="gaussian_mixture_raw")

    def __post_init__(self):
        if not (self.theta > 0 and self.sigma1 > 0 and self.sigma2 > 0):
            raise DomainError("gaussian_mixture_raw requires theta, sigma1, sigma2 > 0")
        if not math.isfinite(self.theta0):
            raise DomainError("gaussian_mixture_raw requires a finite theta0")

    def params(self):
        return {"theta": self.theta, "theta0": self.theta0,
                "sigma1": self.sigma1, "sigma2": self.sigma2}

    def _lmgf(self, h, t):
        psi0 = np.logaddexp(self.theta0 * t + 0.5 * self.sigma1**2 * t * t,
                            -self.theta0 * t + 0.5 * self.sigma2**2 * t * t) - math.log(2.0)
        return psi0 + self.theta * t if h else psi0

    def _mean_variance(self, h):
        var = self.theta0**2 + 0.5 * (self.sigma1**2 + self.sigma2**2)
        return self.theta * h, var

    def _sample(self, h, rng, size):
        coin = rng.random(size) < 0.5
        z = rng.standard_normal(size)
        d = np.where(coin, self.theta0 + self.sigma1 * z, -self.theta0 + self.sigma2 * z)
        return d + self.theta * h


FAMILIES = {
    "gaussian_llr": GaussianLLR,
    "bernoulli_llr": BernoulliLLR,
    "laplace_llr": LaplaceLLR,
    "gaussian_mixture_raw": GaussianMixtureRaw,
}


def make_model(family, **params):
    """Build a model from its family name and parameter table."""
    try:
        cls = FAMILIES[family]
    except KeyError:
        raise DomainError(
            f"unknown family {family!r}; expected one of {sorted(FAMILIES)}") from None
    try:
        return cls(**{k: float(v) for k, v in params.items()})
    except TypeError as exc:
        raise DomainError(f"{family}: {exc}") from None


def lmgf(model, h, t):
    return model.lmgf(h, t)


def mean_variance(model, h):
    return model.mean_variance(h)


def sample(model, h, rng, size=None):
    return model.sample(h, rng, size)
