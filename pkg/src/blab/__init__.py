"""Stochastic Burgers laboratory: solvers, noise, norms and verification harnesses."""
__version__ = "0.1.0"

from .grid import Field, Grid
from .noise import NoiseModel
from .weights import ExponentTriple, WeightSpec
from .solvers import BurgersEnsemble, SeparableColeHopf, SolverConfig
from .diagnostics import CheckReport
from .config import ExperimentConfig, load_config

__all__ = [
    "Field", "Grid", "NoiseModel", "WeightSpec", "ExponentTriple", "SolverConfig",
    "BurgersEnsemble", "SeparableColeHopf", "CheckReport", "ExperimentConfig", "load_config",
]
