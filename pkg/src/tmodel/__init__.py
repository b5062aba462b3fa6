"""Pseudospectral t-model closure for inviscid Burgers and incompressible Euler.

The package provides the reduced-order t-model tendency for the 1D inviscid
Burgers equation and the 2D/3D incompressible Euler equations, adaptive and
symplectic time integration, energy-decay diagnostics, and a CLI experiment
runner.
"""

__version__ = "0.1.0"

from .spectral import (
    ModePartition,
    SpectralField,
    build_partition,
    convolve_dealiased,
    convolve_direct,
    leray_apply,
)
from .dynamics import Closure, RhsEvaluator, System, energy, energy_decay_rate

__all__ = [
    "ModePartition",
    "SpectralField",
    "build_partition",
    "convolve_dealiased",
    "convolve_direct",
    "leray_apply",
    "System",
    "Closure",
    "RhsEvaluator",
    "energy",
    "energy_decay_rate",
    "__version__",
]
