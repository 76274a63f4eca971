"""Strict TOML run configuration.

Unknown keys are fatal; every error names the offending key path. Defaults
are materialised on parse so that :meth:`RunConfig.to_dict` echoes the full
configuration that was actually used.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from . import models
from .network import (CombinationMatrix, Topology, default_topology, laplacian_weights,
                      uniform_matrix)

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "dump_config",
           "bundled_config"]

MODEL_PARAMS = {
    "gaussian_llr": ("theta", "sigma"),
    "bernoulli_llr": ("p0", "p1"),
    "laplace_llr": ("theta", "sigma"),
    "gaussian_mixture_raw": ("theta", "theta0", "sigma1", "sigma2"),
}
CRITERIA = ("fixed", "maxmin", "neyman_pearson")


class ConfigError(ValueError):
    pass


def _take(table, path, allowed):
    if not isinstance(table, dict):
        raise ConfigError(f"{path}: expected a table")
    unknown = sorted(set(table) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown key")
    return table


def _num(value, path, *, lo=None, hi=None, lo_open=False, hi_open=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    if integer and (not isinstance(value, int)):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{path}: must be finite")
    if lo is not None and (value < lo or (lo_open and value == lo)):
        raise ConfigError(f"{path}: {value} is below the allowed range")
    if hi is not None and (value > hi or (hi_open and value == hi)):
        raise ConfigError(f"{path}: {value} is above the allowed range")
    return value


@dataclass
class ModelSection:
    family: str
    params: dict

    def build(self):
        try:
            return models.make_model(self.family, **self.params)
        except models.DomainError as exc:
            raise ConfigError(f"model: {exc}") from None

    def to_dict(self):
        return {"family": self.family, **self.params}


@dataclass
class NetworkSection:
    topology: str = "default10"
    S: Optional[int] = None
    edges: Optional[list] = None
    matrix: Optional[list] = None

    def build(self):
        """Return ``(Topology or None, CombinationMatrix)``."""
        try:
            if self.topology == "default10":
                top = default_topology()
                return top, laplacian_weights(top)
            if self.topology == "full":
                return None, uniform_matrix(self.S)
            top = Topology.from_one_based(self.S, self.edges) if self.edges is not None else None
            if self.matrix is not None:
                return top, CombinationMatrix.from_weights(self.matrix, top)
            return top, laplacian_weights(top)
        except ValueError as exc:
            raise ConfigError(f"network: {exc}") from None

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class DetectorSection:
    criterion: str
    eta: Optional[float] = None
    alpha_bar: Optional[float] = None
    pi0: float = 0.5
    pi1: float = 0.5

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class SimulationSection:
    mu_list: list = field(default_factory=list)
    replications: int = 100_000
    master_seed: int = 0
    burn_in_epsilon: float = 1e-8
    sampling: str = "independent"
    samples_per_replication: int = 1

    def to_dict(self):
        return asdict(self)


@dataclass
class ScenarioSection:
    segments: list
    mu_list: list = field(default_factory=lambda: [0.05])
    replications: int = 10_000
    running_consensus: bool = True

    def to_dict(self):
        return asdict(self)


@dataclass
class AnalysisSection:
    t_grid: list = field(default_factory=lambda: [-5.0, 5.0, 101])
    gamma_grid: Optional[list] = None

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class OutputSection:
    dir: str = "out"

    def to_dict(self):
        return asdict(self)


@dataclass
class RunConfig:
    model: ModelSection
    network: NetworkSection
    detector: DetectorSection
    simulation: SimulationSection
    analysis: AnalysisSection
    output: OutputSection
    scenario: Optional[ScenarioSection] = None

    def to_dict(self):
        out = {
            "model": self.model.to_dict(),
            "network": self.network.to_dict(),
            "detector": self.detector.to_dict(),
            "simulation": self.simulation.to_dict(),
            "analysis": self.analysis.to_dict(),
            "output": self.output.to_dict(),
        }
        if self.scenario is not None:
            out["scenario"] = self.scenario.to_dict()
        return out

    def digest(self):
        """SHA-256 of the canonical JSON of the materialised configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _parse_model(tab):
    if "family" not in tab:
        raise ConfigError("model.family: missing")
    family = tab["family"]
    if family not in MODEL_PARAMS:
        raise ConfigError(f"model.family: unknown family {family!r}")
    names = MODEL_PARAMS[family]
    _take(tab, "model", ("family",) + names)
    params = {}
    for name in names:
        if name not in tab:
            raise ConfigError(f"model.{name}: missing for family {family}")
        params[name] = float(_num(tab[name], f"model.{name}"))
    section = ModelSection(family, params)
    section.build()
    return section


def _parse_network(tab):
    _take(tab, "network", ("topology", "S", "edges", "matrix"))
    topo = tab.get("topology")
    edges, matrix = tab.get("edges"), tab.get("matrix")
    if topo is None:
        topo = "custom" if (edges is not None or matrix is not None) else "default10"
    if topo not in ("default10", "full", "custom"):
        raise ConfigError(f"network.topology: unknown topology {topo!r}")
    S = tab.get("S")
    if S is not None:
        S = _num(S, "network.S", lo=1, integer=True)
    if topo == "default10":
        if S not in (None, 10):
            raise ConfigError("network.S: default10 has exactly 10 sensors")
        if edges is not None or matrix is not None:
            raise ConfigError("network.edges: not allowed with topology default10")
        S = 10
    elif topo == "full":
        if S is None:
            raise ConfigError("network.S: required for topology full")
        if edges is not None or matrix is not None:
            raise ConfigError("network.edges: not allowed with topology full")
    else:
        if edges is None and matrix is None:
            raise ConfigError("network.edges: custom topology needs edges or matrix")
        if matrix is not None:
            if S is None:
                S = len(matrix)
            if len(matrix) != S or any(len(row) != S for row in matrix):
                raise ConfigError(f"network.matrix: must be {S}x{S}")
            matrix = [[float(_num(v, "network.matrix")) for v in row] for row in matrix]
        if edges is not None:
            if S is None:
                raise ConfigError("network.S: required with an edge list")
            for i, pair in enumerate(edges):
                if not (isinstance(pair, list) and len(pair) == 2):
                    raise ConfigError(f"network.edges[{i}]: expected a 1-based pair")
                for v in pair:
                    _num(v, f"network.edges[{i}]", lo=1, hi=S, integer=True)
            edges = [list(p) for p in edges]
    section = NetworkSection(topo, S, edges, matrix)
    section.build()
    return section


def _parse_detector(tab):
    _take(tab, "detector", ("criterion", "eta", "alpha_bar", "pi0", "pi1"))
    crit = tab.get("criterion")
    if crit not in CRITERIA:
        raise ConfigError(f"detector.criterion: expected exactly one of {CRITERIA}, got {crit!r}")
    sec = DetectorSection(crit)
    if crit == "fixed":
        if "eta" not in tab:
            raise ConfigError("detector.eta: required for criterion fixed")
        sec.eta = float(_num(tab["eta"], "detector.eta"))
    elif "eta" in tab:
        raise ConfigError(f"detector.eta: not used by criterion {crit}")
    if crit == "neyman_pearson":
        if "alpha_bar" not in tab:
            raise ConfigError("detector.alpha_bar: required for criterion neyman_pearson")
        sec.alpha_bar = float(_num(tab["alpha_bar"], "detector.alpha_bar", lo=0, hi=1,
                                   lo_open=True, hi_open=True))
    elif "alpha_bar" in tab:
        raise ConfigError(f"detector.alpha_bar: not used by criterion {crit}")
    sec.pi0 = float(_num(tab.get("pi0", 0.5), "detector.pi0", lo=0, hi=1))
    sec.pi1 = float(_num(tab.get("pi1", 1.0 - sec.pi0), "detector.pi1", lo=0, hi=1))
    if abs(sec.pi0 + sec.pi1 - 1.0) > 1e-12:
        raise ConfigError("detector.pi1: priors must sum to 1")
    return sec


def _parse_mu_list(values, path):
    if not isinstance(values, list):
        raise ConfigError(f"{path}: expected a list")
    out = [float(_num(v, f"{path}[{i}]", lo=0, hi=1, lo_open=True, hi_open=True))
           for i, v in enumerate(values)]
    if any(b >= a for a, b in zip(out, out[1:])):
        raise ConfigError(f"{path}: entries must be strictly decreasing")
    return out


def _parse_simulation(tab):
    _take(tab, "simulation", ("mu_list", "replications", "master_seed", "burn_in_epsilon",
                              "sampling", "samples_per_replication"))
    sec = SimulationSection()
    if "mu_list" in tab:
        sec.mu_list = _parse_mu_list(tab["mu_list"], "simulation.mu_list")
    sec.replications = _num(tab.get("replications", sec.replications),
                            "simulation.replications", lo=1, integer=True)
    sec.master_seed = _num(tab.get("master_seed", sec.master_seed), "simulation.master_seed",
                           lo=0, hi=2**64 - 1, integer=True)
    sec.burn_in_epsilon = float(_num(tab.get("burn_in_epsilon", sec.burn_in_epsilon),
                                     "simulation.burn_in_epsilon", lo=0, hi=1,
                                     lo_open=True, hi_open=True))
    sec.sampling = tab.get("sampling", sec.sampling)
    if sec.sampling not in ("independent", "thinned"):
        raise ConfigError(f"simulation.sampling: unknown mode {sec.sampling!r}")
    sec.samples_per_replication = _num(tab.get("samples_per_replication", 1),
                                       "simulation.samples_per_replication", lo=1, integer=True)
    if sec.sampling == "independent" and sec.samples_per_replication != 1:
        raise ConfigError("simulation.samples_per_replication: must be 1 for independent sampling")
    return sec


def _parse_scenario(tab):
    _take(tab, "scenario", ("segments", "mu_list", "replications", "running_consensus"))
    segs = tab.get("segments")
    if not isinstance(segs, list) or not segs:
        raise ConfigError("scenario.segments: expected a non-empty list of [h, steps]")
    for i, seg in enumerate(segs):
        if not (isinstance(seg, list) and len(seg) == 2):
            raise ConfigError(f"scenario.segments[{i}]: expected [h, steps]")
        _num(seg[0], f"scenario.segments[{i}]", lo=0, hi=1, integer=True)
        _num(seg[1], f"scenario.segments[{i}]", lo=1, integer=True)
    sec = ScenarioSection([list(s) for s in segs])
    if "mu_list" in tab:
        sec.mu_list = _parse_mu_list(tab["mu_list"], "scenario.mu_list")
    sec.replications = _num(tab.get("replications", sec.replications),
                            "scenario.replications", lo=1, integer=True)
    rc = tab.get("running_consensus", True)
    if not isinstance(rc, bool):
        raise ConfigError("scenario.running_consensus: expected true or false")
    sec.running_consensus = rc
    return sec


def _parse_grid(value, path):
    if not (isinstance(value, list) and len(value) == 3):
        raise ConfigError(f"{path}: expected [start, stop, num]")
    start = float(_num(value[0], path))
    stop = float(_num(value[1], path))
    num = _num(value[2], path, lo=1, integer=True)
    return [start, stop, num]


def _parse_analysis(tab):
    _take(tab, "analysis", ("t_grid", "gamma_grid"))
    sec = AnalysisSection()
    if "t_grid" in tab:
        sec.t_grid = _parse_grid(tab["t_grid"], "analysis.t_grid")
    if "gamma_grid" in tab:
        sec.gamma_grid = _parse_grid(tab["gamma_grid"], "analysis.gamma_grid")
    return sec


def parse_config(text):
    """Parse and validate TOML text into a :class:`RunConfig`."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    _take(doc, "config", ("model", "network", "detector", "simulation", "scenario",
                          "analysis", "output"))
    for required in ("model", "detector"):
        if required not in doc:
            raise ConfigError(f"{required}: missing section")
    out = doc.get("output", {})
    _take(out, "output", ("dir",))
    return RunConfig(
        model=_parse_model(doc["model"]),
        network=_parse_network(doc.get("network", {})),
        detector=_parse_detector(doc["detector"]),
        simulation=_parse_simulation(doc.get("simulation", {})),
        analysis=_parse_analysis(doc.get("analysis", {})),
        output=OutputSection(str(out.get("dir", "out"))),
        scenario=_parse_scenario(doc["scenario"]) if "scenario" in doc else None,
    )


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg):
    """Serialise a config back to TOML (all defaults included)."""
    return tomli_w.dumps(cfg.to_dict())


def bundled_config(name):
    """Text of a configuration shipped with the package."""
    return resources.files("diffusion_ld").joinpath("configs", name).read_text(encoding="utf-8")
