"""Faster-than-Nyquist NFDM link simulator (b-modulation, focusing NLSE)."""

from .errors import (
    BModAmplitudeError,
    ConfigError,
    ConvergenceError,
    EdgeEnergyError,
    FtnNfdmError,
    GridMismatchError,
    IllConditionedError,
    SphereTimeoutError,
    StepSizeError,
)
from .params import FiberPlan, NormalizationMap, SignalPlan, build_normalization

__version__ = "0.1.0"

__all__ = [
    "BModAmplitudeError",
    "ConfigError",
    "ConvergenceError",
    "EdgeEnergyError",
    "FiberPlan",
    "FtnNfdmError",
    "GridMismatchError",
    "IllConditionedError",
    "NormalizationMap",
    "SignalPlan",
    "SphereTimeoutError",
    "StepSizeError",
    "build_normalization",
]
