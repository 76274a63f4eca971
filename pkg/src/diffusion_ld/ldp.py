"""Large-deviations quantities of the steady-state diffusion output.

For a statistic with LMGF ``psi_h`` the small-step-size output obeys an LDP
with rate ``S * Omega_h``, where

    omega_h(t) = integral_0^t psi_h(tau) / tau dtau
    Omega_h(gamma) = sup_t [gamma t - omega_h(t)]

``omega_h`` is evaluated by adaptive Gauss-Kronrod quadrature. The transform is
computed from the first-order condition ``psi_h(t)/t = gamma``; the left side
is strictly increasing in ``t`` so the root is bracketed by doubling and then
bisected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ._numerics import QuadratureError, bisect_increasing, gauss_kronrod

__all__ = [
    "RateFunctionSolver",
    "Legendre",
    "SlopeLimit",
    "ExponentPair",
    "omega",
    "fenchel_legendre",
    "exponents",
    "np_type2_exponent",
]

_FD_STEP = 1e-6
# below this |tau| the integrand psi(tau)/tau is replaced by psi'(0)
_ORIGIN_PATCH = 1e-9
_STALL_RTOL = 1e-12
_RICHARDSON_DEPTH = 2


class Legendre(NamedTuple):
    """Value of ``Omega_h(gamma)`` with its maximiser.

    ``status`` is one of ``"mean"`` (gamma is the mean, value 0),
    ``"interior"`` (regular solve), ``"outside"`` (gamma beyond a finite
    slope limit, value +inf), ``"capped"`` (bracket cap hit without enclosing
    gamma; treated as outside, but not certified) or ``"boundary"`` (gamma
    equals a finite slope limit; value is the bisection limit).
    """

    value: float
    argmax: Optional[float]
    status: str


class SlopeLimit(NamedTuple):
    """``lim psi(t)/t`` as ``t -> +-inf``; ``capped`` means growth never stalled."""

    value: float
    capped: bool


class ExponentPair(NamedTuple):
    E0: float
    E1: float
    S_E0: float
    S_E1: float


@dataclass(frozen=True)
class RateFunctionSolver:
    """Evaluator for ``omega_h``, ``Omega_h`` and threshold exponents."""

    model: object
    quad_tol: float = 1e-10
    root_tol: float = 1e-12
    bracket_cap: float = 1e6
    max_subdivisions: int = 10_000

    def mean(self, h):
        return self.model.mean_variance(h)[0]

    def slope_at_zero(self, h):
        """``psi_h'(0)`` by central difference of the closed form."""
        psi = self.model.lmgf
        return (psi(h, _FD_STEP) - psi(h, -_FD_STEP)) / (2.0 * _FD_STEP)

    def psi_over_t(self, h, t):
        """``psi_h(t)/t`` continued at the origin by ``psi_h'(0)``."""
        t = np.asarray(t, dtype=float)
        small = np.abs(t) < _ORIGIN_PATCH
        safe = np.where(small, 1.0, t)
        out = np.asarray(self.model.lmgf(h, safe)) / safe
        out = np.where(small, self.slope_at_zero(h), out)
        return float(out) if out.ndim == 0 else out

    def omega_increment(self, h, a, b):
        """``omega_h(b) - omega_h(a)`` by direct quadrature over ``[a, b]``."""
        value, _ = gauss_kronrod(lambda tau: self.psi_over_t(h, tau), float(a), float(b),
                                 self.quad_tol, self.max_subdivisions)
        return value

    def omega(self, h, t):
        return self.omega_increment(h, 0.0, t)

    def slope_limit(self, h, direction):
        """Limit of ``psi_h(t)/t`` for ``direction`` = +1 or -1.

        ``psi_h(t)/t`` is evaluated at ``t = direction * 2**k``. When the limit
        is finite the sequence approaches it like ``c/t``, far too slowly for a
        plain stall test, so the test is applied to the Richardson-extrapolated
        sequence (``c/t`` and ``d/t**2`` terms removed). Growth that never
        stalls before ``bracket_cap`` is reported as ``capped``.
        """
        raw = [self.psi_over_t(h, direction)]
        table = [[raw[0]]]
        prev = None
        t = 2.0
        while t <= self.bracket_cap:
            raw.append(self.psi_over_t(h, direction * t))
            row = [raw[-1]]
            for j in range(1, min(len(raw), _RICHARDSON_DEPTH + 1)):
                row.append((2**j * row[j - 1] - table[-1][j - 1]) / (2**j - 1))
            table.append(row)
            est = row[-1]
            if prev is not None and len(row) > _RICHARDSON_DEPTH and \
                    abs(est - prev) <= _STALL_RTOL * abs(est):
                return SlopeLimit(est, False)
            prev = est
            t *= 2.0
        return SlopeLimit(raw[-1], True)

    def domain(self, h):
        """``(omega_minus, omega_plus)`` as :class:`SlopeLimit` values."""
        return self.slope_limit(h, -1.0), self.slope_limit(h, 1.0)

    def fenchel_legendre(self, h, gamma):
        gamma = float(gamma)
        if not math.isfinite(gamma):
            raise ValueError("gamma must be finite")
        m = self.mean(h)
        if gamma == m:
            return Legendre(0.0, 0.0, "mean")
        direction = 1.0 if gamma > m else -1.0

        # g(s) = direction * (psi(s*direction)/(s*direction) - gamma) increases in s > 0
        def g(s):
            return direction * (self.psi_over_t(h, direction * s) - gamma)

        lo, hi = 0.0, 1.0
        g_hi = g(hi)
        status = "interior"
        while g_hi < 0.0:
            if hi * 2.0 > self.bracket_cap:
                return self._beyond_cap(h, gamma, direction, hi)
            lo, hi = hi, hi * 2.0
            g_hi = g(hi)
        s = bisect_increasing(g, lo, hi, self.root_tol)
        t = direction * s
        # the supremum also covers t = 0, where gamma t - omega(t) = 0
        value = max(gamma * t - self.omega(h, t), 0.0)
        return Legendre(value, t, status)

    def _beyond_cap(self, h, gamma, direction, t_cap):
        # psi/t stayed below gamma up to the cap: gamma is outside a finite
        # slope limit, on it, or inside with a root too far out to certify
        lim = self.slope_limit(h, direction)
        if lim.capped:
            return Legendre(math.inf, None, "capped")
        gap = direction * (gamma - lim.value)
        if gap > _STALL_RTOL * max(1.0, abs(gamma)):
            return Legendre(math.inf, None, "outside")
        if gap < -_STALL_RTOL * max(1.0, abs(gamma)):
            return Legendre(math.inf, None, "capped")
        t = direction * t_cap
        try:
            om = self.omega(h, t)
        except QuadratureError as exc:
            om = exc.value
        return Legendre(max(gamma * t - om, 0.0), t, "boundary")

    def rate_function(self, h, gamma, S):
        """``I(gamma) = S Omega_h(gamma)``."""
        return S * self.fenchel_legendre(h, gamma).value

    def exponents(self, detector, S):
        """Error exponents of the threshold test ``decide H0 iff y <= eta``."""
        eta = float(getattr(detector, "base_threshold", detector))
        e0 = self.fenchel_legendre(0, eta).value if eta >= self.mean(0) else 0.0
        e1 = self.fenchel_legendre(1, eta).value if eta <= self.mean(1) else 0.0
        return ExponentPair(e0, e1, S * e0, S * e1)

    def np_type2_exponent(self):
        """Miss exponent ``Omega_1(E_0 x)`` of the Neyman-Pearson design."""
        m0, m1 = self.mean(0), self.mean(1)
        if not m0 < m1:
            raise ValueError("model must satisfy E0 x < E1 x")
        return self.fenchel_legendre(1, m0).value


def omega(solver, h, t):
    return solver.omega(h, t)


def fenchel_legendre(solver, h, gamma):
    return solver.fenchel_legendre(h, gamma)


def exponents(solver, detector, S):
    return solver.exponents(detector, S)


def np_type2_exponent(solver):
    return solver.np_type2_exponent()
