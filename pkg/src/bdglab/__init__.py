"""Numerical companion for the semiclassical limit of BdG dynamics on the circle."""

__version__ = "0.1.0"

from .grid import PhaseGrid, SpatialGrid
from .interaction import InteractionKernel
from .kinetic import PhaseDensity, TwoParticleDensity
from .state import DensityOperator, PairingState, QuantumState, quasifree_init

__all__ = [
    "DensityOperator", "InteractionKernel", "PairingState", "PhaseDensity", "PhaseGrid",
    "QuantumState", "SpatialGrid", "TwoParticleDensity", "quasifree_init", "__version__",
]
