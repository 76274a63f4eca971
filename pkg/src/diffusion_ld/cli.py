"""Command-line interface: ``diffusion-ld <subcommand> --config run.cfg``.

Exit codes: 0 success, 1 validation or acceptance failure, 2 usage or
config error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from ._io import atomic_write, json_safe, read_csv, read_json, write_csv, write_json
from .analysis import exponent_convergence
from .config import ConfigError, bundled_config, parse_config
from .design import fixed_threshold, maxmin_threshold, np_threshold
from .engine import (ScenarioSpec, SimulationConfig, burn_in_length, end_of_segment_errors,
                     monte_carlo_errors, recovery_steps, scenario_run)
from .ldp import RateFunctionSolver

__all__ = ["main", "build_parser", "bundled_config", "acceptance_checks"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
BUILTIN_PREFIX = "builtin:"

SIM_COLUMNS = ("mu", "sensor", "alpha_hat", "alpha_lo", "alpha_hi", "beta_hat", "beta_lo",
               "beta_hi", "emp_exp_alpha", "emp_exp_beta", "zero_count_flag")

# acceptance bars applied by ``report``
GAP_TOLERANCE = 0.30
SPREAD_TOLERANCE = 0.15
NP_ALPHA_TOLERANCE = 0.03


class UsageError(Exception):
    pass


def _load(path, args):
    if path is None:
        raise UsageError("--config is required for this subcommand")
    try:
        if path.startswith(BUILTIN_PREFIX):
            text = bundled_config(path[len(BUILTIN_PREFIX):])
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
    except (OSError, FileNotFoundError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    cfg = parse_config(text)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        cfg.simulation.master_seed = args.seed
    if args.out is not None:
        cfg.output.dir = args.out
    return cfg


class Context:
    """Objects built once from a config and shared by the subcommands."""

    def __init__(self, cfg, workers=1, command=""):
        self.cfg = cfg
        self.workers = workers
        self.command = command
        self.model = cfg.model.build()
        _, self.A = cfg.network.build()
        self.S = self.A.S
        self.solver = RateFunctionSolver(self.model)
        self._detector = None

    @property
    def detector(self):
        if self._detector is None:
            d = self.cfg.detector
            if d.criterion == "fixed":
                self._detector = fixed_threshold(d.eta)
            elif d.criterion == "maxmin":
                self._detector = maxmin_threshold(self.solver)
            else:
                self._detector = np_threshold(self.model, d.alpha_bar, self.S)
        return self._detector

    def metadata(self, mus=()):
        return {
            "version": __version__,
            "command": self.command,
            "config_sha256": self.cfg.digest(),
            "master_seed": self.cfg.simulation.master_seed,
            "burn_in": {repr(float(mu)): burn_in_length(mu, self.cfg.simulation.burn_in_epsilon)
                        for mu in mus},
            "config": self.cfg.to_dict(),
        }

    def path(self, name):
        return os.path.join(self.cfg.output.dir, name)

    def theory(self):
        pair = self.solver.exponents(self.detector, self.S)
        out = pair._asdict()
        if self.detector.criterion == "neyman_pearson":
            e1 = self.solver.np_type2_exponent()
            out.update(E1=e1, S_E1=self.S * e1, E0=0.0, S_E0=0.0)
        return out


def cmd_analyze(ctx):
    cfg = ctx.cfg
    t_start, t_stop, t_num = cfg.analysis.t_grid
    ts = np.linspace(t_start, t_stop, int(t_num))
    m0, m1 = ctx.solver.mean(0), ctx.solver.mean(1)
    if cfg.analysis.gamma_grid is None:
        span = m1 - m0
        gammas = np.linspace(m0 - 0.5 * span, m1 + 0.5 * span, 41)
    else:
        g0, g1, gn = cfg.analysis.gamma_grid
        gammas = np.linspace(g0, g1, int(gn))

    omega_rows, transform_rows = [], []
    for h in (0, 1):
        # accumulate omega along the sorted grid from the origin outwards
        psi = ctx.model.lmgf(h, ts)
        omegas = np.empty_like(ts)
        for sign in (1, -1):
            idx = [i for i in range(len(ts)) if (ts[i] >= 0) == (sign > 0)]
            idx.sort(key=lambda i: abs(ts[i]))
            prev_t, acc = 0.0, 0.0
            for i in idx:
                acc += ctx.solver.omega_increment(h, prev_t, ts[i])
                prev_t = ts[i]
                omegas[i] = acc
        for t, p, w in zip(ts, psi, omegas):
            omega_rows.append({"h": h, "t": t, "psi": p, "omega": w})
        for g in gammas:
            leg = ctx.solver.fenchel_legendre(h, g)
            transform_rows.append({"h": h, "gamma": g, "Omega": leg.value,
                                   "argmax_t": "" if leg.argmax is None else leg.argmax})

    summary = {"metadata": ctx.metadata(), "detector": ctx.detector.to_dict()}
    summary.update(ctx.theory())
    for key, direction in (("omega_minus", -1.0), ("omega_plus", 1.0)):
        vals = {}
        for h in (0, 1):
            lim = ctx.solver.slope_limit(h, direction)
            vals[str(h)] = direction * math.inf if lim.capped else lim.value
        summary[key] = vals
    summary["mean"] = {"0": m0, "1": m1}

    meta = ctx.metadata()
    write_csv(ctx.path("analyze_omega.csv"), ("h", "t", "psi", "omega"), omega_rows, meta)
    write_csv(ctx.path("analyze_transform.csv"), ("h", "gamma", "Omega", "argmax_t"),
              transform_rows, meta)
    write_json(ctx.path("analyze.json"), summary)
    return EXIT_OK


def cmd_design(ctx):
    pair = ctx.theory()
    spec = ctx.detector.to_dict()
    spec.update(E0=pair["E0"], E1=pair["E1"])
    print(json.dumps(json_safe(spec), sort_keys=True))
    write_json(ctx.path("design.json"), {"metadata": ctx.metadata(), **spec})
    return EXIT_OK


def _sim_config(ctx, mu):
    s = ctx.cfg.simulation
    return SimulationConfig(mu=mu, replications=s.replications, burn_in_epsilon=s.burn_in_epsilon,
                            master_seed=s.master_seed, sampling=s.sampling,
                            samples_per_replication=s.samples_per_replication,
                            workers=ctx.workers, progress=ctx.workers > 1 or s.replications > 10**4)


def cmd_simulate(ctx):
    mus = ctx.cfg.simulation.mu_list
    if not mus:
        raise UsageError("simulation.mu_list is empty; nothing to simulate")
    estimates, rows = [], []
    for mu in mus:
        est = monte_carlo_errors(ctx.model, ctx.A, mu, ctx.detector, _sim_config(ctx, mu))
        estimates.append(est)
        rows.extend(est.rows())
    theory = ctx.theory()
    d = ctx.cfg.detector
    per_mu = [{
        "mu": e.mu, "threshold": e.threshold, "burn_in": e.burn_in,
        "replications": e.alpha.n, "sampling": e.sampling,
        "alpha_counts": e.alpha.counts, "beta_counts": e.beta.counts,
    } for e in estimates]
    summary = {"metadata": ctx.metadata(mus), "detector": ctx.detector.to_dict(),
               "S": ctx.S, "theory": theory, "estimates": per_mu,
               "priors": [d.pi0, d.pi1], "alpha_bar": d.alpha_bar,
               "sampling_flag": ctx.cfg.simulation.sampling != "independent"}
    if len(estimates) >= 2:
        reports = {}
        if ctx.detector.criterion != "neyman_pearson":
            reports["bayes"] = exponent_convergence(
                estimates, min(theory["S_E0"], theory["S_E1"]), "bayes", (d.pi0, d.pi1))
            reports["alpha"] = exponent_convergence(estimates, theory["S_E0"], "alpha")
        reports["beta"] = exponent_convergence(estimates, theory["S_E1"], "beta")
        summary["exponent_reports"] = {k: r.to_dict() for k, r in reports.items()}
    write_csv(ctx.path("simulate.csv"), SIM_COLUMNS, rows, ctx.metadata(mus))
    write_json(ctx.path("simulate.json"), summary)
    return EXIT_OK


def cmd_scenario(ctx):
    sc = ctx.cfg.scenario
    if sc is None:
        raise UsageError("config has no [scenario] section")
    rows, per_mu = [], []
    for i, mu in enumerate(sc.mu_list):
        spec = ScenarioSpec(tuple(map(tuple, sc.segments)), mu, sc.replications)
        with_rc = sc.running_consensus and i == 0
        res = scenario_run(ctx.model, ctx.A, spec, ctx.detector, running_consensus=with_rc,
                           master_seed=ctx.cfg.simulation.master_seed, workers=ctx.workers)
        label = f"diffusion_mu={mu!r}"
        names = {"diffusion": label, "running_consensus": "running_consensus"}
        for alg, probs in res.error_prob.items():
            for n in range(probs.shape[0]):
                for k in range(probs.shape[1]):
                    rows.append({"step": n + 1, "sensor": k + 1, "algorithm": names[alg],
                                 "error_prob": probs[n, k]})
        entry = {"mu": mu, "threshold": ctx.detector.threshold(mu),
                 "end_of_segment": end_of_segment_errors(res),
                 "recovery_below_0.1": recovery_steps(res, 0.1)}
        if with_rc:
            entry["running_consensus_end_of_segment"] = end_of_segment_errors(
                res, "running_consensus")
        per_mu.append(entry)
    write_csv(ctx.path("scenario.csv"), ("step", "sensor", "algorithm", "error_prob"), rows,
              ctx.metadata(sc.mu_list))
    write_json(ctx.path("scenario.json"), {"metadata": ctx.metadata(sc.mu_list), "runs": per_mu})
    return EXIT_OK


def _status(ok):
    return "pass" if ok else "fail"


def acceptance_checks(summary, rows):
    """Pass/fail checks on a ``simulate`` summary and its per-sensor CSV rows.

    Statuses are ``pass``, ``fail`` or ``inconclusive`` (all estimates
    flagged as zero counts).
    """
    checks = []
    reports = summary.get("exponent_reports", {})
    mus = sorted({r["mu"] for r in rows})
    small = [r for r in rows if r["mu"] == mus[0]]
    np_mode = summary["detector"]["criterion"] == "neyman_pearson"

    def gap_check(name, rep):
        gaps = [g for g in rep["gaps"][int(np.argmin(rep["mus"]))] if g is not None]
        if not gaps:
            checks.append({"name": name, "status": "inconclusive",
                           "detail": "every estimate at the smallest step-size is a zero count"})
            return
        worst = max(abs(g) for g in gaps)
        checks.append({"name": name, "status": _status(worst <= GAP_TOLERANCE),
                       "detail": f"max |gap| {worst:.3f} at mu={min(rep['mus'])} "
                                 f"(tolerance {GAP_TOLERANCE})"})

    if not np_mode and "bayes" in reports:
        rep = reports["bayes"]
        gap_check("exponent_gap_smallest_mu", rep)
        checks.append({"name": "gap_shrinks_with_inverse_mu",
                       "status": _status(rep["gap_decreasing"]),
                       "detail": f"mean |gap| per mu {rep['mean_abs_gaps']} for mus {rep['mus']}"})
        emp = np.array(rep["empirical"][int(np.argmin(rep["mus"]))], dtype=float)
        flagged = np.array(rep["flagged"][int(np.argmin(rep["mus"]))], dtype=bool)
        emp = emp[~flagged]
        if emp.size:
            spread = float((emp.max() - emp.min()) / emp.mean())
            checks.append({"name": "sensor_spread", "status": _status(spread <= SPREAD_TOLERANCE),
                           "detail": f"(max-min)/mean {spread:.3f} "
                                     f"(tolerance {SPREAD_TOLERANCE})"})
        th = summary["theory"]
        if abs(th["E0"] - th["E1"]) <= 1e-9 * max(th["E0"], th["E1"], 1e-300):
            overlap = all(max(r["alpha_lo"], r["beta_lo"]) <= min(r["alpha_hi"], r["beta_hi"])
                          for r in rows)
            checks.append({"name": "alpha_beta_agreement", "status": _status(overlap),
                           "detail": "Wilson intervals of alpha and beta overlap per sensor"})
    if np_mode:
        ab = summary["alpha_bar"]
        devs = {mu: max(abs(r["alpha_hat"] - ab) for r in rows if r["mu"] == mu) for mu in mus}
        worst = devs[mus[0]]
        checks.append({"name": "np_alpha_pinning",
                       "status": _status(worst <= NP_ALPHA_TOLERANCE),
                       "detail": f"max |alpha - {ab}| {worst:.4f} at mu={mus[0]}"})
        seq = [devs[mu] for mu in sorted(mus, reverse=True)]
        if len(seq) >= 2:
            checks.append({"name": "np_alpha_deviation_shrinks",
                           "status": _status(all(b < a for a, b in zip(seq, seq[1:]))),
                           "detail": f"max deviation per decreasing mu {seq}"})
        if "beta" in reports:
            gap_check("np_miss_exponent", reports["beta"])
    if not small:
        checks.append({"name": "rows_present", "status": "fail", "detail": "no CSV rows"})
    return checks


def cmd_report(ctx_or_dir):
    out_dir = ctx_or_dir
    try:
        summary = read_json(os.path.join(out_dir, "simulate.json"))
        _, rows = read_csv(os.path.join(out_dir, "simulate.csv"))
    except OSError as exc:
        raise UsageError(f"cannot read simulate output in {out_dir}: {exc}") from None
    checks = acceptance_checks(summary, rows)
    meta = summary["metadata"]
    lines = ["# Simulation report", "",
             f"- config sha256: `{meta['config_sha256']}`",
             f"- master seed: {meta['master_seed']}",
             f"- version: {meta['version']}",
             f"- burn-in lengths: {meta['burn_in']}",
             f"- theory: S*E0 = {summary['theory']['S_E0']}, S*E1 = {summary['theory']['S_E1']}",
             "", "| check | status | detail |", "|---|---|---|"]
    lines += [f"| {c['name']} | {c['status']} | {c['detail']} |" for c in checks]
    atomic_write(os.path.join(out_dir, "report.md"), "\n".join(lines) + "\n")
    write_json(os.path.join(out_dir, "report.json"), {"metadata": meta, "checks": checks})
    for c in checks:
        print(f"{c['status'].upper():12s} {c['name']}: {c['detail']}")
    return EXIT_FAIL if any(c["status"] == "fail" for c in checks) else EXIT_OK


def cmd_validate():
    from .validation import run_all
    results = run_all()
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name} ({r.seconds:.2f}s): {r.detail}")
    return EXIT_OK if all(r.ok for r in results) else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(
        prog="diffusion-ld",
        description="Error exponents and Monte Carlo validation for diffusion detectors.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("analyze", "tabulate omega and Omega and report the error exponents"),
            ("design", "print the detector threshold design as JSON"),
            ("simulate", "Monte Carlo steady-state error probabilities"),
            ("scenario", "error probability versus time under hypothesis drift"),
            ("report", "summarise a simulate run with pass/fail checks"),
            ("validate", "run the fast invariant suite")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help=f"TOML run config (or {BUILTIN_PREFIX}<name>)")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        if args.command == "validate":
            return cmd_validate()
        if args.command == "report":
            out = args.out
            if out is None:
                out = _load(args.config, args).output.dir if args.config else "out"
            return cmd_report(out)
        cfg = _load(args.config, args)
        ctx = Context(cfg, args.workers, args.command)
        return {"analyze": cmd_analyze, "design": cmd_design, "simulate": cmd_simulate,
                "scenario": cmd_scenario}[args.command](ctx)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
