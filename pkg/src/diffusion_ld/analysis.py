"""Post-processing of Monte Carlo output: error rates, exponents, normality."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

__all__ = [
    "WILSON_Z",
    "wilson_interval",
    "empirical_exponent",
    "ErrorRate",
    "MonteCarloEstimate",
    "ExponentReport",
    "NormalityReport",
    "bayes_error",
    "exponent_convergence",
    "normality_diagnostics",
    "ks_distance_normal",
]

WILSON_Z = 1.959963984540054  # two-sided 95%


def wilson_interval(k, n, z=WILSON_Z):
    """Wilson score interval for ``k`` successes out of ``n``."""
    k = np.asarray(k, dtype=float)
    p = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    lo = np.where(k == 0, 0.0, np.clip(center - half, 0.0, 1.0))
    hi = np.where(k == n, 1.0, np.clip(center + half, 0.0, 1.0))
    return lo, hi


def empirical_exponent(p, mu):
    """``-mu ln p``."""
    with np.errstate(divide="ignore"):
        return -mu * np.log(p)


@dataclass(frozen=True)
class ErrorRate:
    """Per-sensor error counts of one hypothesis out of ``n`` replications.

    A zero count is reported as the upper bound ``1/n`` and flagged; its
    exponent is then a lower bound.
    """

    counts: np.ndarray
    n: int
    mu: float

    @property
    def raw(self):
        return np.asarray(self.counts, dtype=float) / self.n

    @property
    def flagged(self):
        return np.asarray(self.counts) == 0

    @property
    def p_hat(self):
        return np.where(self.flagged, 1.0 / self.n, self.raw)

    @property
    def interval(self):
        return wilson_interval(self.counts, self.n)

    @property
    def exponent(self):
        return empirical_exponent(self.p_hat, self.mu)


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Steady-state false-alarm (``alpha``) and miss (``beta``) estimates."""

    mu: float
    threshold: float
    burn_in: int
    alpha: ErrorRate
    beta: ErrorRate
    sampling: str = "independent"

    @property
    def S(self):
        return len(self.alpha.counts)

    def rows(self):
        """One record per sensor, in CSV column order."""
        a_lo, a_hi = self.alpha.interval
        b_lo, b_hi = self.beta.interval
        a_exp, b_exp = self.alpha.exponent, self.beta.exponent
        out = []
        for k in range(self.S):
            flag = int(self.alpha.flagged[k]) | (int(self.beta.flagged[k]) << 1)
            out.append({
                "mu": self.mu, "sensor": k + 1,
                "alpha_hat": self.alpha.p_hat[k], "alpha_lo": a_lo[k], "alpha_hi": a_hi[k],
                "beta_hat": self.beta.p_hat[k], "beta_lo": b_lo[k], "beta_hi": b_hi[k],
                "emp_exp_alpha": a_exp[k], "emp_exp_beta": b_exp[k],
                "zero_count_flag": flag,
            })
        return out


def bayes_error(estimate, pi0, pi1):
    """Average error ``pi0 alpha + pi1 beta`` per sensor."""
    if pi0 < 0 or pi1 < 0 or abs(pi0 + pi1 - 1.0) > 1e-12:
        raise ValueError(f"priors must be nonnegative and sum to 1, got ({pi0}, {pi1})")
    alpha, beta = _rates(estimate)
    return pi0 * alpha + pi1 * beta


def _rates(estimate):
    if isinstance(estimate, MonteCarloEstimate):
        return estimate.alpha.raw, estimate.beta.raw
    alpha, beta = estimate
    return np.asarray(alpha, dtype=float), np.asarray(beta, dtype=float)


@dataclass
class ExponentReport:
    theory: float
    mus: np.ndarray
    empirical: np.ndarray  # (len(mus), S)
    flagged: np.ndarray
    gaps: np.ndarray  # relative, NaN where flagged
    kind: str = "bayes"
    extra: dict = field(default_factory=dict)

    @property
    def smallest_mu_index(self):
        return int(np.argmin(self.mus))

    @property
    def smallest_mu_gaps(self):
        return self.gaps[self.smallest_mu_index]

    @property
    def mean_abs_gaps(self):
        """Sensor-averaged |gap| per step-size, ordered like ``mus``."""
        with np.errstate(invalid="ignore"):
            return np.array([np.nanmean(np.abs(g)) if np.any(~np.isnan(g)) else np.nan
                             for g in self.gaps])

    @property
    def inconclusive(self):
        return bool(np.any(self.flagged.all(axis=1)))

    @property
    def gap_decreasing(self):
        """True when the averaged |gap| falls strictly as ``1/mu`` grows."""
        order = np.argsort(-self.mus)  # increasing 1/mu
        g = self.mean_abs_gaps[order]
        if np.any(np.isnan(g)):
            return False
        return bool(np.all(np.diff(g) < 0))

    def to_dict(self):
        return {
            "kind": self.kind,
            "theory": self.theory,
            "mus": self.mus.tolist(),
            "empirical": self.empirical.tolist(),
            "flagged": self.flagged.tolist(),
            "gaps": [[None if math.isnan(v) else v for v in row] for row in self.gaps],
            "mean_abs_gaps": [None if math.isnan(v) else v for v in self.mean_abs_gaps],
            "gap_decreasing": self.gap_decreasing,
            "inconclusive": self.inconclusive,
        }


def exponent_convergence(estimates, theory, kind="bayes", priors=(0.5, 0.5)):
    """Tabulate ``-mu ln p`` against the theoretical ``S E`` over step-sizes.

    ``estimates`` holds :class:`MonteCarloEstimate` objects or ``(mu, p)``
    pairs with ``p`` a per-sensor probability array. ``kind`` selects the
    error: ``"alpha"``, ``"beta"`` or ``"bayes"`` (prior-weighted average).
    """
    if len(estimates) < 2:
        raise ValueError("exponent convergence needs at least two step-sizes")
    mus, emp, flags = [], [], []
    for est in estimates:
        if isinstance(est, MonteCarloEstimate):
            if kind == "alpha":
                p, flag = est.alpha.p_hat, est.alpha.flagged
            elif kind == "beta":
                p, flag = est.beta.p_hat, est.beta.flagged
            else:
                p = bayes_error(est, *priors)
                flag = p == 0.0
                p = np.where(flag, 1.0 / est.alpha.n, p)
            mu = est.mu
        else:
            mu, p = est
            p = np.asarray(p, dtype=float)
            flag = p <= 0.0
        mus.append(mu)
        # flagged estimates keep the 1/R floor (exponent is a lower bound); raw
        # zero probabilities have no floor and contribute 0
        emp.append(empirical_exponent(np.where(p > 0.0, p, 1.0), mu))
        flags.append(np.asarray(flag, dtype=bool))
    emp, flags = np.array(emp), np.array(flags)
    with np.errstate(invalid="ignore", divide="ignore"):
        gaps = np.where(flags, np.nan, (emp - theory) / theory)
    return ExponentReport(float(theory), np.array(mus, dtype=float), emp, flags, gaps, kind)


def _normal_cdf(z):
    return 0.5 * erfc(-z / math.sqrt(2.0))


def ks_distance_normal(z):
    """Kolmogorov-Smirnov distance of a sample to the standard normal CDF."""
    z = np.sort(np.asarray(z, dtype=float))
    n = len(z)
    cdf = _normal_cdf(z)
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


@dataclass
class NormalityReport:
    mean: np.ndarray
    variance: np.ndarray
    skewness: np.ndarray
    ks: np.ndarray
    n: int

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("mean", "variance", "skewness", "ks")} | {
            "n": self.n}


def normality_diagnostics(samples, model, h, mu, S, *, center=None, scale=None):
    """Standardise ``(y - E_h x) / sqrt(mu var_h / (2S))`` per sensor and summarise.

    ``center``/``scale`` override the model moments (used for calibration).
    """
    y = np.asarray(samples, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] < 1000:
        raise ValueError("normality diagnostics need at least 1e3 draws")
    m, var = model.mean_variance(h) if model is not None else (0.0, 1.0)
    if center is None:
        center = m
    if scale is None:
        scale = math.sqrt(mu * var / (2.0 * S))
    z = (y - center) / scale
    mean = z.mean(axis=0)
    variance = z.var(axis=0, ddof=1)
    dev = z - mean
    skew = (dev**3).mean(axis=0) / (dev**2).mean(axis=0) ** 1.5
    ks = np.array([ks_distance_normal(z[:, k]) for k in range(z.shape[1])])
    return NormalityReport(mean, variance, skew, ks, y.shape[0])
