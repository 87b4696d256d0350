"""Phase-space laboratory for classical and quantum particles.

Modules
  grid          grids, field containers, Wigner transforms, field I/O
  potentials    potential specifications
  classical     Liouville dynamics, characteristics, conserved functionals
  quantum       Schroedinger, Moyal and classical-wave-function quantum evolution
  observables   pointwise, statistical, ordered and quantum expectation values
  diagnostics   classical and quantum admissibility of phase-space functions
  finite_bit    exact constructions on M = 2^Q states
  experiments   configured scenarios with manifests
  cli           ``phaselab`` command line
"""

from .grid import (
    BoundaryMassWarning,
    ClassicalWaveFunction,
    DensityMatrix,
    GridError,
    PhaseSpaceDensity,
    PhaseSpaceGrid,
    PositionWaveFunction,
    ValidationError,
    WignerFunction,
    inverse_wigner,
    marginals,
    position_variance,
    momentum_variance,
    read_field,
    wigner_transform,
    write_field,
)
from .potentials import Potential

__all__ = [
    "BoundaryMassWarning",
    "ClassicalWaveFunction",
    "DensityMatrix",
    "GridError",
    "PhaseSpaceDensity",
    "PhaseSpaceGrid",
    "PositionWaveFunction",
    "Potential",
    "ValidationError",
    "WignerFunction",
    "inverse_wigner",
    "marginals",
    "momentum_variance",
    "position_variance",
    "read_field",
    "wigner_transform",
    "write_field",
]

__version__ = "0.1.0"
