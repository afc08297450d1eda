"""Batched eigendecomposition of small and medium symmetric matrices.

The pipeline tridiagonalizes each matrix with Householder reflections
applied as rank-2 updates, then diagonalizes with explicit Givens QR
iterations under double Wilkinson shifts, shrinking the active dimension
as trailing eigenvalues lock in.  Everything is vectorized over the batch
dimension.  A self-contained Jacobi oracle and a verify/bench harness sit
alongside the solver.
"""

from .core import (
    BadMagic,
    BatchedEigError,
    BatchedMatrix,
    BatchedSymmetric,
    BlockTooLarge,
    DimMismatch,
    NoConvergence,
    NonFinite,
    NonPositiveSpectrum,
    NonSymmetric,
    ShapeMismatch,
    SolverConfig,
    TridiagonalBatch,
    TruncatedPayload,
    read_batch,
    read_matrix,
    validate,
    write_batch,
)
from .householder import (
    ReflectorSet,
    WyFactors,
    accumulate_reflectors,
    householder_vector,
    rank2_update,
    tridiagonalize,
    wy_accumulate,
    wy_factors,
)
from .qr import (
    DiagonalizeResult,
    GivensCoeffs,
    ShiftPair,
    SolveDiagnostics,
    SweepState,
    accumulate_sweep_q,
    diagonalize,
    double_shift_step,
    economic_q_update,
    finalize_small,
    givens_coeffs,
    initial_state,
    shifted_sweep,
    try_deflate,
    wilkinson_shifts,
)
from .solver import EigenResult, batched_eig, matrix_power, zca_whiten
from .oracle import OracleReport, Tolerances, closed_form_eig, compare, jacobi_eig
from .bench import (
    VERIFY_DEFLATION_TOL,
    BenchRow,
    BenchSpec,
    VerifyCell,
    bench_csv,
    gen_spd,
    loglog_slope,
    run_bench,
    run_verify,
    verify_report,
)

__version__ = "0.1.0"
