"""Liouville and Moyal evolution agree for quadratic potentials and part for anharmonic ones.

Both generators share the streaming term.  They differ only through third and
higher derivatives of the potential, so a harmonic oscillator cannot tell them
apart while a quartic well can.
"""

import numpy as np

from phaselab.classical import gaussian_wavefunction, liouville_evolve
from phaselab.grid import ClassicalWaveFunction, PhaseSpaceGrid, WignerFunction
from phaselab.potentials import Potential
from phaselab.quantum import moyal_evolve

grid = PhaseSpaceGrid.square(128)
psi = gaussian_wavefunction(grid, 0.5, 0.0, 0.7071, 0.7071)
w0 = psi.values**2

for V in (Potential.harmonic(1.0), Potential.quartic(1.0)):
    classical = liouville_evolve(ClassicalWaveFunction(grid, w0), V, 1.0, 0.005)[-1][1].values
    quantum = moyal_evolve(WignerFunction(grid, w0, tol=None), V, 1.0, 0.005)[-1][1].values
    print(f"{V.kind:>9}: max |Liouville - Moyal| at t = 1 is {np.abs(classical - quantum).max():.2e}")
