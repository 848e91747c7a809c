"""Rare-event estimation for network reliability with the Bayesian improved
cross-entropy method and categorical mixture sampling densities."""
from .discrete import MixtureParams, SampleSpace
from .engine import EngineConfig, PerformanceModel, RunResult, run
from .gem import WeightedSampleSet, build_prior, fit_map, select_k
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "EngineConfig", "MixtureParams", "PerformanceModel", "RunResult", "SampleSpace",
    "WeightedSampleSet", "build_prior", "fit_map", "run", "select_k",
]
