"""Monte Carlo simulation of adapt-then-combine (ATC) diffusion detectors.

Replications are grouped in fixed-size blocks. Block ``b`` under hypothesis
``h`` draws from its own Philox (counter-based) stream keyed by
``(master_seed, purpose, h, b)``, and within a block every step consumes the
stream in the same order. Results therefore depend on the seed only, never on
how blocks are spread over workers.
"""

from __future__ import annotations

import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .analysis import ErrorRate, MonteCarloEstimate
from .network import CombinationMatrix

__all__ = [
    "BLOCK_SIZE",
    "SimulationConfig",
    "ScenarioSpec",
    "ScenarioResult",
    "burn_in_length",
    "thinning_gap",
    "make_stream",
    "diffusion_step",
    "steady_state_sample",
    "steady_state_samples",
    "monte_carlo_errors",
    "centralized_run",
    "scenario_run",
    "end_of_segment_errors",
    "recovery_steps",
]

BLOCK_SIZE = 10_000

# stream purposes
STEADY, CENTRAL, SCENARIO = 1, 2, 3


def burn_in_length(mu, epsilon=1e-8):
    """Smallest ``n`` with ``(1 - mu)**n <= epsilon``."""
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"step-size must lie in (0, 1], got {mu}")
    if mu == 1.0:
        return 1
    return max(1, math.ceil(math.log(1.0 / epsilon) / -math.log1p(-mu)))


def thinning_gap(mu, level=0.01):
    """Spacing between retained draws in thinned mode, ``(1 - mu)**gap <= level``."""
    return burn_in_length(mu, level)


@dataclass(frozen=True)
class SimulationConfig:
    mu: float = 0.01
    replications: int = 100_000
    burn_in_epsilon: float = 1e-8
    master_seed: int = 0
    samples_per_replication: int = 1
    sampling: str = "independent"  # or "thinned"
    workers: int = 1
    progress: bool = False

    def __post_init__(self):
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"mu must lie in (0, 1), got {self.mu}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.sampling not in ("independent", "thinned"):
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        if self.sampling == "independent" and self.samples_per_replication != 1:
            raise ValueError("independent sampling keeps one draw per replication")

    @property
    def burn_in(self):
        return burn_in_length(self.mu, self.burn_in_epsilon)


@dataclass(frozen=True)
class ScenarioSpec:
    """Piecewise-constant truth: ``segments`` is a sequence of ``(h, steps)``."""

    segments: tuple
    mu: float
    replications: int = 10_000

    def __post_init__(self):
        segs = tuple((int(h), int(n)) for h, n in self.segments)
        if not segs:
            raise ValueError("a scenario needs at least one segment")
        for h, n in segs:
            if h not in (0, 1) or n < 1:
                raise ValueError(f"bad segment ({h}, {n})")
        object.__setattr__(self, "segments", segs)

    @property
    def truth(self):
        return np.concatenate([np.full(n, h, dtype=np.int8) for h, n in self.segments])


def make_stream(master_seed, *key):
    """Counter-based generator for the stream labelled ``key``."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def _weights(A):
    return A.weights if isinstance(A, CombinationMatrix) else np.asarray(A, dtype=float)


def diffusion_step(y, A, model, h, mu, rng, x=None):
    """One synchronous ATC step on states ``y`` of shape ``(S,)`` or ``(R, S)``.

    ``v = y + mu (x - y)`` then ``y_k = sum_l a_kl v_l``. ``x`` is drawn
    from ``model`` under ``h`` unless given.
    """
    w = _weights(A)
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != w.shape[0]:
        raise ValueError("state dimension does not match the combination matrix")
    if x is None:
        x = model.sample(h, rng, y.shape)
    v = y + mu * (x - y)
    return v @ w.T


def _steady_block(model, h, w, mu, n_rep, burn_in, rng, gap=0, n_keep=1):
    S = w.shape[0]
    wt = np.ascontiguousarray(w.T)
    y = np.zeros((n_rep, S))
    for _ in range(burn_in):
        x = model.sample(h, rng, (n_rep, S))
        y += mu * (x - y)
        y = y @ wt
    kept = [y]
    for _ in range(n_keep - 1):
        for _ in range(gap):
            x = model.sample(h, rng, (n_rep, S))
            y += mu * (x - y)
            y = y @ wt
        kept.append(y)
    return np.concatenate(kept) if n_keep > 1 else y


def steady_state_sample(model, h, A, mu, config, rng):
    """One approximate draw of the steady-state vector ``(y*_1, ..., y*_S)``."""
    w = _weights(A)
    return _steady_block(model, h, w, mu, 1, burn_in_length(mu, config.burn_in_epsilon), rng)[0]


def _blocks(n):
    sizes = [BLOCK_SIZE] * (n // BLOCK_SIZE)
    if n % BLOCK_SIZE:
        sizes.append(n % BLOCK_SIZE)
    return sizes


def _steady_task(args):
    model, h, w, mu, n_rep, burn_in, seed, block, gap, n_keep = args
    rng = make_stream(seed, STEADY, h, block)
    return _steady_block(model, h, w, mu, n_rep, burn_in, rng, gap, n_keep)


def _run_tasks(fn, tasks, workers, progress, label):
    out = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in enumerate(pool.map(fn, tasks)):
                out.append(res)
                if progress:
                    print(f"{label}: block {i + 1}/{len(tasks)}", file=sys.stderr)
    else:
        for i, task in enumerate(tasks):
            out.append(fn(task))
            if progress:
                print(f"{label}: block {i + 1}/{len(tasks)}", file=sys.stderr)
    return out


def steady_state_samples(model, h, A, config, mu=None):
    """Steady-state draws of shape ``(replications * samples_per_replication, S)``."""
    mu = config.mu if mu is None else mu
    cfg = replace(config, mu=mu)
    w = _weights(A)
    if cfg.sampling == "thinned":
        gap, n_keep = thinning_gap(mu), cfg.samples_per_replication
    else:
        gap, n_keep = 0, 1
    tasks = [(model, h, w, mu, n, cfg.burn_in, cfg.master_seed, b, gap, n_keep)
             for b, n in enumerate(_blocks(cfg.replications))]
    parts = _run_tasks(_steady_task, tasks, cfg.workers, cfg.progress, f"mu={mu:g} h={h}")
    return np.concatenate(parts)


def monte_carlo_errors(model, A, mu, detector, config, samples=None):
    """Per-sensor steady-state false-alarm and miss estimates at step-size ``mu``.

    ``samples`` may supply precomputed ``{h: draws}`` to avoid re-simulating.
    """
    cfg = replace(config, mu=mu)
    eta = detector.threshold(mu)
    rates = {}
    for h in (0, 1):
        y = samples[h] if samples is not None and h in samples else \
            steady_state_samples(model, h, A, cfg)
        wrong = (y > eta) if h == 0 else (y <= eta)
        rates[h] = ErrorRate(wrong.sum(axis=0), y.shape[0], mu)
    return MonteCarloEstimate(mu, eta, cfg.burn_in, rates[0], rates[1], cfg.sampling)


def centralized_run(model, h, mu, S, config, rng, n_steps=None, trajectory=False):
    """Centralised stochastic-gradient recursion over ``config.replications`` chains.

    ``y(n) = y(n-1) + (mu/S) sum_l (x_l(n) - y(n-1))``, started from 0. The
    observations are drawn with shape ``(R, S)`` per step, exactly as in the
    diffusion simulation, so both consume a shared stream identically.
    Returns the final states ``(R,)`` or, with ``trajectory``, ``(n_steps, R)``.
    """
    n_steps = burn_in_length(mu, config.burn_in_epsilon) if n_steps is None else n_steps
    R = config.replications
    y = np.zeros(R)
    path = np.empty((n_steps, R)) if trajectory else None
    for n in range(n_steps):
        x = model.sample(h, rng, (R, S))
        y = y + mu / S * (x - y[:, None]).sum(axis=1)
        if trajectory:
            path[n] = y
    return path if trajectory else y


@dataclass
class ScenarioResult:
    """Per-step, per-sensor fraction of replications deciding wrongly."""

    truth: np.ndarray
    error_prob: dict  # algorithm -> (T, S)
    mu: float
    replications: int

    @property
    def steps(self):
        return np.arange(1, len(self.truth) + 1)

    def switch_steps(self):
        """0-based indices where the true hypothesis changes."""
        return np.flatnonzero(np.diff(self.truth)) + 1

    def segment_ends(self):
        return np.concatenate([self.switch_steps(), [len(self.truth)]]) - 1


def _scenario_task(args):
    model, w, spec_truth, mu, n_rep, eta, with_rc, seed, block = args
    rng = make_stream(seed, SCENARIO, 0, block)
    S = w.shape[0]
    wt = np.ascontiguousarray(w.T)
    T = len(spec_truth)
    y = np.zeros((n_rep, S))
    y_rc = np.zeros((n_rep, S)) if with_rc else None
    err = np.zeros((T, S), dtype=np.int64)
    err_rc = np.zeros((T, S), dtype=np.int64) if with_rc else None
    for n in range(T):
        h = int(spec_truth[n])
        x = model.sample(h, rng, (n_rep, S))
        y = (y + mu * (x - y)) @ wt
        err[n] = ((y > eta) != h).sum(axis=0)
        if with_rc:
            step = 1.0 / (n + 1)
            y_rc = (y_rc + step * (x - y_rc)) @ wt
            err_rc[n] = ((y_rc > eta) != h).sum(axis=0)
    return err, err_rc


def scenario_run(model, A, spec, detector, running_consensus=True, master_seed=0,
                 workers=1, progress=False):
    """Error probability versus time under a drifting hypothesis.

    The running-consensus baseline is the same ATC recursion with the
    decaying step ``mu_n = 1/n``, fed the same observations.
    """
    w = _weights(A)
    truth = spec.truth
    eta = detector.threshold(spec.mu)
    tasks = [(model, w, truth, spec.mu, n, eta, running_consensus, master_seed, b)
             for b, n in enumerate(_blocks(spec.replications))]
    parts = _run_tasks(_scenario_task, tasks, workers, progress, "scenario")
    err = sum(p[0] for p in parts)
    probs = {"diffusion": err / spec.replications}
    if running_consensus:
        probs["running_consensus"] = sum(p[1] for p in parts) / spec.replications
    return ScenarioResult(truth, probs, spec.mu, spec.replications)


def end_of_segment_errors(result, algorithm="diffusion"):
    """Error probabilities ``(n_segments, S)`` at the last step of each segment."""
    return result.error_prob[algorithm][result.segment_ends()]


def recovery_steps(result, level, algorithm="diffusion"):
    """Steps after each switch until the error first drops below ``level``.

    ``level`` is a scalar or one value per switch (rows) and sensor. Returns an
    integer array ``(n_switches, S)``; -1 marks no recovery within the segment.
    """
    err = result.error_prob[algorithm]
    switches = result.switch_steps()
    ends = np.concatenate([switches[1:], [len(result.truth)]])
    lvl = np.broadcast_to(np.asarray(level, dtype=float), (len(switches), err.shape[1]))
    out = np.full((len(switches), err.shape[1]), -1, dtype=np.int64)
    for i, (start, stop) in enumerate(zip(switches, ends)):
        below = err[start:stop] < lvl[i]
        hit = below.any(axis=0)
        out[i, hit] = below.argmax(axis=0)[hit] + 1
    return out
