"""Spin-1 / oscillator multiphoton resonance toolkit.

Natural units: energies in hbar*omega0, times in 1/omega0.
"""

from .core import ModelParams, dimensionless_g, coupling_from_g, spin_matrices
from .errors import (
    AccuracyError,
    BracketError,
    CapacityError,
    ConvergenceError,
    GridResolutionError,
    InvalidParameterError,
    NoResonanceError,
    SpinBosonError,
)

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "dimensionless_g",
    "coupling_from_g",
    "spin_matrices",
    "AccuracyError",
    "BracketError",
    "CapacityError",
    "ConvergenceError",
    "GridResolutionError",
    "InvalidParameterError",
    "NoResonanceError",
    "SpinBosonError",
    "__version__",
]
