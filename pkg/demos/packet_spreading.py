"""A free Gaussian packet spreads ballistically.

The position variance of a free packet with momentum width d grows as
1/(4 d^2) + d^2 t^2 / m^2.  This script evolves the packet with the split-step
Schroedinger solver and prints the numerical variance next to the closed form.
"""

import numpy as np

from phaselab.grid import PhaseSpaceGrid, PositionWaveFunction
from phaselab.potentials import Potential
from phaselab.quantum import GaussianPacketSpec, packet_analytics, schrodinger_evolve

grid = PhaseSpaceGrid.square(512)
spec = GaussianPacketSpec(p_mean=0.5, p_width=1.0)
phi0 = PositionWaveFunction(grid, spec.wavefunction(grid.x))

print(f"{'t':>5} {'Var(X) numeric':>16} {'Var(X) exact':>14}")
for t, phi in schrodinger_evolve(phi0, Potential.free(), 2.0, 0.01, stride=40):
    rho = np.abs(phi.values) ** 2 * grid.dx
    mean = np.sum(grid.x * rho)
    var = np.sum((grid.x - mean) ** 2 * rho)
    print(f"{t:5.2f} {var:16.10f} {packet_analytics(spec, t).var_x:14.10f}")
