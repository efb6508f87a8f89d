"""
ergokde - invariant density estimation for ergodic Markov processes.

Simulators for Levy-driven Ornstein-Uhlenbeck processes and jump SDEs, a
binned kernel estimator of the invariant density, an adaptive sup-norm
bandwidth rule and a Monte Carlo harness for rate experiments.
"""

from .errors import (
    ConfigError,
    DegenerateDataError,
    EmptyBandwidthGridError,
    ErgoKDEError,
    KernelConstructionError,
    NumericalError,
    ReferenceUnavailableError,
    SimulationError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateDataError",
    "EmptyBandwidthGridError",
    "ErgoKDEError",
    "KernelConstructionError",
    "NumericalError",
    "ReferenceUnavailableError",
    "SimulationError",
    "ValidationError",
    "__version__",
]
