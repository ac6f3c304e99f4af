"""Intrinsic scaling toolkit for jump processes with regularly varying kernels.

Modules
-------
scale
    ``ell``, ``L``, ``L^{-1}``, ``phi_a``, annulus masses, dyadic radii, diagnostics.
symbol
    Characteristic exponent and its comparison with ``L(1/|xi|)``.
sim
    Compound Poisson path simulation (compiled kernel with a numpy fallback).
mc
    Monte Carlo estimators for exit, hitting and harmonic-function experiments.
cli
    The ``levyscale`` experiment driver.
"""
__version__ = "0.1.0"

from ._backend import BACKEND
from .errors import (ConfigError, DomainError, EventCapError, InsufficientSignalError, LevyScaleError,
                     QuadratureError, RangeError)
from .scale import ScaleCalculus, ScaleFunction, sphere_area
from .sim import JumpProcessModel, simulate_exit, simulate_hit_or_exit, simulate_paths
from .symbol import SymbolEvaluator, radial_average

__all__ = [
    "BACKEND",
    "ConfigError",
    "DomainError",
    "EventCapError",
    "InsufficientSignalError",
    "JumpProcessModel",
    "LevyScaleError",
    "QuadratureError",
    "RangeError",
    "ScaleCalculus",
    "ScaleFunction",
    "SymbolEvaluator",
    "radial_average",
    "simulate_exit",
    "simulate_hit_or_exit",
    "simulate_paths",
    "sphere_area",
]
