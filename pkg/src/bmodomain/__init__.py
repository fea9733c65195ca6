"""Discretized bmo norms, Whitney extension and (eps, delta) checks on planar domains."""
from .errors import DisconnectedError, NotEvaluable, ResolutionError, ValidationError
from .geometry import Cube, DomainModel, DomainSpec, build_domain, default_window, load_domain
from .gridfield import GridFunction, TestFunctionSpec, sample
from .oscillation import bmo_norm, gamma, omega
from .whitney import match_cubes, whitney_decompose

__version__ = "0.1.0"

__all__ = [
    "Cube", "DomainModel", "DomainSpec", "GridFunction", "TestFunctionSpec",
    "ValidationError", "ResolutionError", "NotEvaluable", "DisconnectedError",
    "build_domain", "default_window", "load_domain", "sample",
    "bmo_norm", "omega", "gamma", "whitney_decompose", "match_cubes",
]
