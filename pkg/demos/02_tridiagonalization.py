"""Watch the Householder stage reduce a symmetric matrix to a band.

Each of the n-2 reflections zeroes one column tail below the first
sub-diagonal, applied as a symmetric rank-2 update (one matrix-vector
product plus two rank-1 updates -- never a full two-sided matrix
product).  The accumulated orthogonal factor P can be formed one
reflector at a time or block-wise through the compact WY form
I - 2 W Y^T; both give the same matrix.
"""

import numpy as np

from batchedeig import (
    BatchedSymmetric,
    accumulate_reflectors,
    gen_spd,
    householder_vector,
    rank2_update,
    tridiagonalize,
    wy_accumulate,
)

np.set_printoptions(precision=4, suppress=True)

a = gen_spd(1, 6, seed=7, condition_decades=1.0)
print("input matrix:")
print(a.data[0])

u, sigma = householder_vector(a, step=0)
after = rank2_update(a, u, sigma)
print(f"\nafter the first reflection (sigma = {sigma[0]:+.4f}), column 0 "
      "has a single sub-diagonal entry:")
print(after.data[0])

tri, reflectors = tridiagonalize(a)
print("\nfull reduction to the band:")
print("  diag    :", tri.diag[0])
print("  off-diag:", tri.offdiag[0])

trace_err = abs(tri.diag[0].sum() - np.trace(a.data[0]))
print(f"  trace preserved to {trace_err:.2e} (orthogonal similarity)")

p = accumulate_reflectors(reflectors)
resid = p.data[0].T @ a.data[0] @ p.data[0] - tri.dense()[0]
print(f"  P^T A P re-densifies to the band: max residual {np.abs(resid).max():.2e}")

blocked = wy_accumulate(reflectors, block=2)
gap = np.abs(blocked.data - p.data).max()
print(f"\nblocked WY accumulation (m = 2) matches the plain product to {gap:.2e}")
