"""Fast invariant suite run by ``diffusion-ld validate``.

Each check is a small deterministic computation; the whole suite runs in a
few seconds. A check returns ``(ok, detail)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import models
from .analysis import bayes_error, exponent_convergence, wilson_interval
from .config import bundled_config, dump_config, parse_config
from .design import fixed_threshold, inv_q, maxmin_threshold, q_function
from .engine import SimulationConfig, burn_in_length, diffusion_step, monte_carlo_errors
from .ldp import RateFunctionSolver
from .network import (CombinationMatrix, default_topology, laplacian_weights, path_topology,
                      perron_envelope, uniform_matrix)

__all__ = ["Check", "CHECKS", "run_all"]

EXAMPLE_MODELS = (
    models.GaussianLLR(1.0, 1.0),
    models.BernoulliLLR(0.49, 0.51),
    models.LaplaceLLR(0.3, 1.0),
    models.GaussianMixtureRaw(0.05, 1.0, 1.0, 0.3),
)


@dataclass
class Check:
    name: str
    ok: bool
    detail: str
    seconds: float


def _lmgf_at_zero():
    worst = max(abs(m.lmgf(h, 0.0)) for m in EXAMPLE_MODELS for h in (0, 1))
    return worst == 0.0, f"max |psi(0)| = {worst:.3g}"


def _llr_shift():
    t = np.linspace(-3, 3, 601)
    worst = max(np.abs(m.lmgf(1, t) - m.lmgf(0, t + 1)).max()
                for m in EXAMPLE_MODELS if m.is_llr)
    return worst < 1e-12, f"max |psi1(t) - psi0(t+1)| = {worst:.3g}"


def _lmgf_moments():
    eps, worst_m, worst_v = 1e-5, 0.0, 0.0
    for m in EXAMPLE_MODELS:
        for h in (0, 1):
            mean, var = m.mean_variance(h)
            up, mid, lo = m.lmgf(h, eps), m.lmgf(h, 0.0), m.lmgf(h, -eps)
            worst_m = max(worst_m, abs((up - lo) / (2 * eps) - mean))
            worst_v = max(worst_v, abs((up - 2 * mid + lo) / eps**2 - var))
    return worst_m < 1e-6 and worst_v < 1e-4, f"mean err {worst_m:.2g}, variance err {worst_v:.2g}"


def _orientation():
    ok = all(m.mean_variance(0)[0] < m.mean_variance(1)[0] for m in EXAMPLE_MODELS)
    return ok, "E0 x < E1 x for every family"


def _doubly_stochastic():
    A = laplacian_weights(default_topology())
    w = A.weights
    err = max(np.abs(w.sum(0) - 1).max(), np.abs(w.sum(1) - 1).max())
    sym = np.array_equal(w, w.T)
    return err <= 1e-12 and sym and A.lambda2 < 1, f"sum err {err:.2g}, lambda2 {A.lambda2:.6f}"


def _path3():
    w = laplacian_weights(path_topology(3)).weights
    ref = np.array([[0.5, 0.5, 0.0], [0.5, 0.0, 0.5], [0.0, 0.5, 0.5]])
    return np.array_equal(w, ref), "path 1-2-3 weights"


def _perron():
    A = laplacian_weights(default_topology())
    C, lam = perron_envelope(A, 200)
    w, b, worst = A.weights, np.eye(10), -np.inf
    for i in range(1, 201):
        b = b @ w
        worst = max(worst, np.abs(b - 0.1).max() - C * lam**i)
    return worst <= 1e-15, f"C = {C:.4g}, lambda = {lam:.4f}"


def _gaussian_closed_form():
    solver = RateFunctionSolver(EXAMPLE_MODELS[0])
    D = 0.5
    worst = 0.0
    for t in np.linspace(-5, 5, 21):
        worst = max(worst, abs(solver.omega(0, t) - D * t * (t / 2 - 1)),
                    abs(solver.omega(1, t) - D * t * (t / 2 + 1)))
    for g in np.linspace(-2, 2, 21):
        worst = max(worst, abs(solver.fenchel_legendre(0, g).value - (g + D) ** 2 / (2 * D)),
                    abs(solver.fenchel_legendre(1, g).value - (g - D) ** 2 / (2 * D)))
    return worst < 1e-8, f"max closed-form error {worst:.2g}"


def _rate_function_shape():
    problems = []
    for m in EXAMPLE_MODELS:
        solver = RateFunctionSolver(m)
        m0, m1 = m.mean_variance(0)[0], m.mean_variance(1)[0]
        grid = np.linspace(m0 - (m1 - m0), m1 + (m1 - m0), 9)
        for h in (0, 1):
            vals = np.array([solver.fenchel_legendre(h, g).value for g in grid])
            if np.any(vals < 0):
                problems.append(f"{m.family} h={h}: negative")
            if np.any(vals[1:-1] > 0.5 * (vals[:-2] + vals[2:]) + 1e-9):
                problems.append(f"{m.family} h={h}: not convex")
            if solver.fenchel_legendre(h, solver.mean(h)).value > 1e-9:
                problems.append(f"{m.family} h={h}: nonzero at mean")
            if abs(solver.slope_at_zero(h) - solver.mean(h)) > 1e-6:
                problems.append(f"{m.family} h={h}: slope at origin")
    return not problems, "; ".join(problems) or "Omega >= 0, convex, zero at the mean"


def _maxmin():
    worst = max(abs(maxmin_threshold(RateFunctionSolver(m)).base_threshold)
                for m in EXAMPLE_MODELS[:2])
    return worst < 1e-8, f"max |eta*| = {worst:.2g}"


def _inv_q():
    worst = max(abs(q_function(inv_q(p)) - p) for p in (1e-6, 1e-3, 0.1, 0.25, 0.9))
    return worst < 1e-9 and inv_q(0.5) == 0.0, f"max round-trip error {worst:.2g}"


def _burn_in():
    ok = all((1 - mu) ** burn_in_length(mu) <= 1e-8 < (1 - mu) ** (burn_in_length(mu) - 1)
             for mu in (0.9, 0.5, 0.05, 0.01, 0.005))
    return ok and burn_in_length(0.9) <= 9, f"n*(0.01) = {burn_in_length(0.01)}"


def _hand_step():
    A = CombinationMatrix.from_weights([[0.5, 0.5], [0.5, 0.5]])
    y = diffusion_step(np.zeros(2), A, None, 0, 0.5, None, x=np.array([1.0, -1.0]))
    return np.array_equal(y, [0.0, 0.0]), f"y = {y.tolist()}"


def _determinism():
    m = EXAMPLE_MODELS[1]
    A = laplacian_weights(default_topology())
    cfg = SimulationConfig(mu=0.5, replications=2000, master_seed=7)
    a = monte_carlo_errors(m, A, 0.5, fixed_threshold(0.0), cfg)
    b = monte_carlo_errors(m, A, 0.5, fixed_threshold(0.0), cfg)
    same = np.array_equal(a.alpha.counts, b.alpha.counts) and \
        np.array_equal(a.beta.counts, b.beta.counts)
    return same, "identical counts for identical seeds"


def _analysis():
    lo, hi = wilson_interval(np.array([0, 3, 50]), 100)
    contains = bool(np.all((lo <= [0, 0.03, 0.5]) & ([0, 0.03, 0.5] <= hi)))
    be = float(bayes_error((np.array([0.01]), np.array([0.04])), 0.3, 0.7)[0])
    mus, SE = np.array([0.05, 0.02, 0.01]), 0.004
    rep = exponent_convergence([(mu, np.full(3, math.exp(-SE / mu))) for mu in mus], SE)
    exact = np.nanmax(np.abs(rep.gaps)) < 1e-12
    return contains and abs(be - 0.031) < 1e-15 and exact, \
        f"wilson ok {contains}, bayes {be:.6g}, synthetic gap {np.nanmax(np.abs(rep.gaps)):.2g}"


def _config_round_trip():
    text = bundled_config("bernoulli.cfg")
    cfg = parse_config(text)
    again = parse_config(dump_config(cfg))
    return again.to_dict() == cfg.to_dict(), f"config hash {cfg.digest()[:12]}"


def _uniform_envelope():
    C, _ = perron_envelope(uniform_matrix(10), 50)
    return C < 1e-15, f"C = {C:.2g}"


CHECKS = (
    ("models.lmgf_at_zero", _lmgf_at_zero),
    ("models.llr_shift_identity", _llr_shift),
    ("models.lmgf_moments", _lmgf_moments),
    ("models.mean_orientation", _orientation),
    ("network.default10_doubly_stochastic", _doubly_stochastic),
    ("network.path3_laplacian", _path3),
    ("network.perron_envelope", _perron),
    ("network.uniform_envelope", _uniform_envelope),
    ("ldp.gaussian_closed_form", _gaussian_closed_form),
    ("ldp.rate_function_shape", _rate_function_shape),
    ("design.maxmin_symmetric", _maxmin),
    ("design.inv_q_round_trip", _inv_q),
    ("engine.burn_in_rule", _burn_in),
    ("engine.hand_step", _hand_step),
    ("engine.determinism", _determinism),
    ("analysis.estimators", _analysis),
    ("config.round_trip", _config_round_trip),
)


def run_all(checks=CHECKS):
    """Run every check; exceptions count as failures."""
    out = []
    for name, fn in checks:
        start = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # noqa: BLE001 - reported, not raised
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(Check(name, bool(ok), detail, time.perf_counter() - start))
    return out
