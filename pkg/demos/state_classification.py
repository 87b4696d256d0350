"""Sort phase-space functions into classical states, quantum states, both or neither.

A function is a classical state when it is non-negative and a quantum state
when its Weyl kernel is a positive operator.  Narrow Gaussians break the
uncertainty bound, the first excited oscillator level goes negative, and a
small admixture of negative weight breaks both.
"""

from phaselab.diagnostics import classify, gaussian_field, neither_state
from phaselab.grid import PhaseSpaceGrid, WignerFunction, wigner_transform
from phaselab.quantum import hermite_state

grid = PhaseSpaceGrid.square(128)
cases = {
    "wide Gaussian": WignerFunction(grid, gaussian_field(grid, 1.0, 1.0)),
    "narrow Gaussian": WignerFunction(grid, gaussian_field(grid, 0.4, 0.4)),
    "first excited level": wigner_transform(hermite_state(grid, 1).density_matrix()),
    "negative admixture": neither_state(grid),
}
for name, f in cases.items():
    c = classify(f)
    print(f"{name:>20}: {c.label:<15} min f = {c.min_wigner:+.3f}  min eigenvalue = {c.min_eigenvalue:+.3f}")
