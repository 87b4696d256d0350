"""A particle on a ring of M = 2^Q cells, built exactly from Q bits.

The location operator is diagonal; the angular momentum hops between
neighbouring cells.  Its plane-wave eigenstates have every occupation number
equal to 1/M, and on an even number of bits a classical location and momentum
commute exactly.
"""

import numpy as np

from phaselab import finite_bit as fb

for Q in (2, 3, 4):
    M = 2**Q
    L = fb.angular_momentum_operator(M)
    print(f"Q = {Q}: angular momentum spectrum {np.round(np.sort(np.linalg.eigvalsh(L)), 3)}")

X, P = fb.classical_operators(4)
print("largest entry of [X_cl, P_cl] for Q = 4:", np.abs(fb.commutator(X, P)).max())

res = fb.bit_chain_check(
    fb.bit_chain_ensemble(fb.state_from_expectations(np.full(15, 0.1), fb.build_generators(2)), (1, 2, 3)),
    (1, 2, 3),
    fb.build_generators(2),
)
print("z1, 1z, zz form a bit chain:", res.passed)
