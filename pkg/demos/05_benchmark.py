"""Desk-scale timing grid: batch amortization and dimension scaling.

The solver's premise is batch efficiency: one solve's bookkeeping is
shared by every matrix in the batch, so per-matrix time collapses as the
batch grows.  Against dimension, cost grows a bit under cubically at
these sizes: the QR stage is quadratic-with-shrinkage-discounts and the
tridiagonalization cubic.  Timing runs the fixed benchmark schedule (n
double steps); the verify command is the accuracy-oriented counterpart.
"""

import numpy as np

from batchedeig import BenchSpec, bench_csv, loglog_slope, run_bench

print("per-matrix time vs batch size (n = 4, eigenvalues only):")
amort = BenchSpec(dims=(4,), batches=(1, 4, 16, 64, 256, 1024), reps=5,
                  seed=7, mode="values")
for row in run_bench(amort):
    bar = "#" * max(1, int(row.per_matrix_s * 2e5))
    print(f"  batch {row.batch:5d}: {row.per_matrix_s * 1e6:8.2f} us/matrix {bar}")

print("\nper-matrix time vs dimension (batch = 256, eigenvalues only):")
spec = BenchSpec(dims=(8, 16, 32), batches=(256,), reps=5, seed=7, mode="values")
rows = run_bench(spec)
for row in rows:
    print(f"  n = {row.dim:2d}: {row.per_matrix_s * 1e6:8.2f} us/matrix, "
          f"k = {row.mean_k:.0f} double steps, {row.rotations} rotations")
slope = loglog_slope([r.dim for r in rows], [r.per_matrix_s for r in rows])
print(f"  log-log slope: {slope:.2f}")

print("\nthe same grid as CSV (the bench subcommand prints this):")
print(bench_csv(rows), end="")
