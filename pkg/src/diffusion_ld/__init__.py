"""Large-deviations error exponents and Monte Carlo validation for adaptive
distributed detection over adapt-then-combine diffusion networks."""

__version__ = "0.1.0"

from .models import (BernoulliLLR, DomainError, GaussianLLR, GaussianMixtureRaw, LaplaceLLR,
                     StatisticModel, make_model)
from .network import (CombinationMatrix, Topology, TopologyError, default_topology,
                      full_topology, laplacian_weights, uniform_matrix)
from .ldp import RateFunctionSolver
from .design import DetectorSpec, fixed_threshold, maxmin_threshold, np_threshold
from .engine import SimulationConfig, ScenarioSpec, monte_carlo_errors, scenario_run
from .config import ConfigError, RunConfig, parse_config

__all__ = [
    "__version__",
    "StatisticModel", "GaussianLLR", "BernoulliLLR", "LaplaceLLR", "GaussianMixtureRaw",
    "DomainError", "make_model",
    "Topology", "TopologyError", "CombinationMatrix", "default_topology", "full_topology",
    "laplacian_weights", "uniform_matrix",
    "RateFunctionSolver",
    "DetectorSpec", "fixed_threshold", "maxmin_threshold", "np_threshold",
    "SimulationConfig", "ScenarioSpec", "monte_carlo_errors", "scenario_run",
    "ConfigError", "RunConfig", "parse_config",
]
