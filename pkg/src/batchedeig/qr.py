"""Diagonalization of batched tridiagonal matrices by shifted QR iterations.

Each sweep runs one explicit QR step T <- Q^T (T - mu I) Q + mu I built from
Givens rotations marching down the diagonal.  A double step applies the two
eigenvalues of the trailing 2x2 block as consecutive shifts (Wilkinson
pairs), which drives the trailing sub-diagonal of every matrix in the batch
to zero at a consistent rate; once the batch-wide maximum drops below the
deflation threshold the trailing row and column are locked and the active
dimension shrinks.  All per-rotation arithmetic is confined to a constant
window of the band, and eigenvector updates touch exactly two columns of
the accumulated orthogonal factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .core import (
    BatchedMatrix,
    NoConvergence,
    SolverConfig,
    TridiagonalBatch,
)

_DUMMY_Q = np.empty((1, 1, 1))

__all__ = [
    "GivensCoeffs",
    "ShiftPair",
    "SweepState",
    "DiagonalizeResult",
    "SolveDiagnostics",
    "givens_coeffs",
    "wilkinson_shifts",
    "initial_state",
    "shifted_sweep",
    "double_shift_step",
    "try_deflate",
    "economic_q_update",
    "accumulate_sweep_q",
    "finalize_small",
    "diagonalize",
]


@dataclass(frozen=True)
class GivensCoeffs:
    """Per-matrix (cos, sin) parameters of one rotation in plane (i, i+1)."""

    c: np.ndarray
    s: np.ndarray
    position: int = 0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=np.float64))
        s = np.atleast_1d(np.asarray(self.s, dtype=np.float64))
        if c.shape != s.shape or c.ndim != 1:
            raise ValueError("c and s must be matching 1-d batch vectors")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "s", s)


@dataclass(frozen=True)
class ShiftPair:
    """Eigenvalues of the trailing 2x2 block [[a, b], [b, d]].

    ``mu_hi`` continues the trailing diagonal entry d (applied first),
    ``mu_lo`` continues a.  The names are positional, not an ordering.
    """

    mu_lo: np.ndarray
    mu_hi: np.ndarray


@dataclass(frozen=True)
class SweepState:
    """Snapshot of the QR loop.

    ``t`` is the active leading block; ``deflated`` holds locked eigenvalues
    in their original slots (entries below ``active_dim`` are not yet set and
    read as zero).  During the loop ``reductions == total_dim - active_dim``.
    """

    t: TridiagonalBatch
    q: BatchedMatrix | None
    active_dim: int
    deflated: np.ndarray
    reductions: int = 0
    double_steps: int = 0
    rotation_count: int = 0

    @property
    def total_dim(self) -> int:
        return self.deflated.shape[1]


@dataclass(frozen=True)
class SolveDiagnostics:
    """Counters from one diagonalization.

    ``reductions`` is the reduction count averaged over executed double
    steps (the quantity that discounts the per-sweep rotation budget);
    ``reduction_events`` is the plain number of shrink events.
    ``converged_steps`` records, per matrix, the double step at which its
    own couplings (beyond the final 2x2, which is closed out exactly) had
    all fallen below the deflation threshold; a matrix can converge well
    before the batch-wide gate lets the loop terminate.
    """

    double_steps: int
    reductions: float
    reduction_events: int
    rotation_count: int
    converged_steps: np.ndarray | None = None


@dataclass(frozen=True)
class DiagonalizeResult:
    """Eigenvalues (slot order), accumulated rotations Q, and diagnostics.

    ``q`` is None when eigenvectors were not requested (identity marker).
    """

    eigenvalues: np.ndarray
    q: BatchedMatrix | None
    diagnostics: SolveDiagnostics


# --------------------------------------------------------------------------
# rotation and shift primitives


def givens_coeffs(x1, x2, position: int = 0) -> GivensCoeffs:
    """Rotation annihilating x2 against x1: R^T (x1, x2) = (hypot(x1,x2), 0).

    Computed by the branch-scaled ratio form, which keeps c^2 + s^2 within
    a couple of ulps of one and cannot overflow.  The degenerate input
    (0, 0) yields the identity rotation (1, 0).
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=np.float64))
    x2 = np.atleast_1d(np.asarray(x2, dtype=np.float64))
    big = np.maximum(np.abs(x1), np.abs(x2))
    live = big > 0
    denom = np.where(live, big, 1.0)
    with np.errstate(invalid="ignore"):
        t1 = x1 / denom
        t2 = x2 / denom
    h = np.sqrt(t1 * t1 + t2 * t2)
    hsafe = np.where(live, h, 1.0)
    c = np.where(live, t1 / hsafe, 1.0)
    s = np.where(live, -t2 / hsafe, 0.0)
    return GivensCoeffs(c, s, position)


def _wilkinson_cs(a, b, d):
    """Shift pair plus the diagonalizing rotation of [[a, b], [b, d]].

    Solves tan(theta) from the quadratic t^2 - 2mt - 1 = 0 with
    m = (a - d) / 2b, taking the smaller-magnitude root so the rotation
    angle stays within 45 degrees; the eigenvalues are read off the rotated
    diagonal.  b = 0 short-circuits to (a, d) with the identity rotation.
    """
    zero_b = b == 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        m = np.where(zero_b, 0.0, (a - d) / (2.0 * b))
        sign = np.where(m >= 0, 1.0, -1.0)
        t = -sign / (np.abs(m) + np.hypot(1.0, m))
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = c * t
    bcs2 = 2.0 * b * c * s
    lo = a * c * c - bcs2 + d * s * s
    hi = a * s * s + bcs2 + d * c * c
    lo = np.where(zero_b, a, lo)
    hi = np.where(zero_b, d, hi)
    c = np.where(zero_b, 1.0, c)
    s = np.where(zero_b, 0.0, s)
    return lo, hi, c, s


def wilkinson_shifts(a, b, d) -> ShiftPair:
    """Shift pair from the trailing 2x2 block entries (a, b, d) per matrix."""
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    d = np.atleast_1d(np.asarray(d, dtype=np.float64))
    lo, hi, _, _ = _wilkinson_cs(a, b, d)
    return ShiftPair(lo, hi)


def _fold_rotation(q: np.ndarray, c: np.ndarray, s: np.ndarray, pos: int,
                   row_stop: int | None = None) -> None:
    """Right-multiply q by the rotation at ``pos`` in place (two columns)."""
    rows = slice(None) if row_stop is None else slice(0, row_stop)
    cb = c[:, None]
    sb = s[:, None]
    colp = q[:, rows, pos].copy()
    colq = q[:, rows, pos + 1]
    q[:, rows, pos] = cb * colp - sb * colq
    q[:, rows, pos + 1] = sb * colp + cb * colq


def economic_q_update(q: BatchedMatrix, g: GivensCoeffs,
                      row_stop: int | None = None) -> BatchedMatrix:
    """Right-multiply Q by one Givens rotation, touching only two columns.

    ``row_stop`` optionally restricts the arithmetic to the leading rows;
    legitimate whenever the trailing rows of both affected columns are
    structurally zero, as they are for the partial products of one sweep
    (rotation i never reaches below row i+1).  The result equals the full
    dense product.
    """
    if g.position + 2 > q.dim_cols:
        raise ValueError(
            f"rotation at position {g.position} needs {g.position + 2} columns, "
            f"Q has {q.dim_cols}"
        )
    if g.c.shape[0] != q.batch:
        raise ValueError("rotation batch does not match Q batch")
    work = q.data.copy()
    _fold_rotation(work, g.c, g.s, g.position, row_stop)
    return BatchedMatrix(work)


def accumulate_sweep_q(rotations: Sequence[GivensCoeffs], dim: int) -> BatchedMatrix:
    """Product R_0 R_1 ... of one sweep's rotations, built windowed.

    Rotations must come in generation order (positions ascending from 0).
    Rotation i only reaches rows 0..i+1 of the partial product, so each
    update is confined to that window; the result is identical to the dense
    accumulation.
    """
    if not rotations:
        raise ValueError("empty rotation sequence")
    batch = rotations[0].c.shape[0]
    q = np.broadcast_to(np.eye(dim), (batch, dim, dim)).copy()
    last = -1
    for g in rotations:
        if g.position <= last:
            raise ValueError("rotations must be ordered by ascending position")
        last = g.position
        _fold_rotation(q, g.c, g.s, g.position, row_stop=g.position + 2)
    return BatchedMatrix(q)


# --------------------------------------------------------------------------
# the QR loop over a mutable working state


class _Loop:
    __slots__ = ("d", "e", "q", "active", "reductions", "double_steps",
                 "rotation_count", "step_r_sum", "converged", "virtual_active")

    def __init__(self, d, e, q, active, reductions=0, double_steps=0,
                 rotation_count=0):
        self.d = d
        self.e = e
        self.q = q
        self.active = active
        self.reductions = reductions
        self.double_steps = double_steps
        self.rotation_count = rotation_count
        self.step_r_sum = 0
        self.converged = np.full(d.shape[0], -1, dtype=np.int64)
        self.virtual_active = np.full(d.shape[0], active, dtype=np.int64)


def _sweep(ls: _Loop, mu: np.ndarray) -> None:
    """One explicit shifted QR sweep over the active block.

    Left pass: march rotations down the band, factoring T - mu I = QR while
    tracking only the working diagonal entry, the sub-diagonal target, and
    the fill-in super-diagonal entry.  Right pass: form RQ + mu I, whose
    band again closes to symmetric tridiagonal; rotations are folded into
    the accumulated eigenvector columns as they retire.
    """
    m = ls.active
    d, e = ls.d, ls.e
    b = d.shape[0]
    cs = np.empty((m - 1, b))
    sn = np.empty((m - 1, b))
    rmain = np.empty((m, b))
    rsup1 = np.empty((m - 1, b))

    dw = d[:, 0] - mu
    g = e[:, 0].copy()
    for i in range(m - 1):
        ei = e[:, i]
        # a zero sub-diagonal target needs no rotation; this keeps already
        # diagonal matrices (and their Q columns) exactly fixed
        live = ei != 0
        r = np.hypot(dw, ei)
        denom = np.where(live, np.where(r > 0, r, 1.0), 1.0)
        c = np.where(live, dw / denom, 1.0)
        s = np.where(live, -ei / denom, 0.0)
        cs[i] = c
        sn[i] = s
        rmain[i] = np.where(live, r, dw)
        dnext = d[:, i + 1] - mu
        rsup1[i] = c * g - s * dnext
        dw = s * g + c * dnext
        if i < m - 2:
            g = c * e[:, i + 1]
    rmain[m - 1] = dw

    cprev = 1.0
    for j in range(m - 1):
        c = cs[j]
        s = sn[j]
        d[:, j] = c * (cprev * rmain[j]) - s * rsup1[j] + mu
        e[:, j] = -s * rmain[j + 1]
        cprev = c
        if ls.q is not None:
            _fold_rotation(ls.q, c, s, j)
    d[:, m - 1] = cprev * rmain[m - 1] + mu
    ls.rotation_count += m - 1


def _double_step(ls: _Loop) -> None:
    m = ls.active
    lo, hi, _, _ = _wilkinson_cs(ls.d[:, m - 2], ls.e[:, m - 2], ls.d[:, m - 1])
    ls.step_r_sum += ls.reductions
    _sweep(ls, hi)
    _sweep(ls, lo)
    ls.double_steps += 1


def _gated_double_step(ls: _Loop, eps: float) -> None:
    """One shift pair, with the deflation gate sampled after each sweep.

    Checking only after the full pair deadlocks the batch gate: for a
    matrix whose trailing 2x2 has already decoupled, the first (trailing)
    shift collapses the coupling cubically but the second, now slightly
    stale, pumps it back to its pre-step magnitude, so a gate that samples
    only the post-pair state never opens.  Deflating between the sweeps
    always samples the collapsed phase, and the second shift then targets
    the shrunk block, which is the position it was extracted for.
    """
    m = ls.active
    lo, hi, _, _ = _wilkinson_cs(ls.d[:, m - 2], ls.e[:, m - 2], ls.d[:, m - 1])
    ls.step_r_sum += ls.reductions
    _sweep(ls, hi)
    _deflate(ls, eps)
    _mark_converged(ls, eps, ls.double_steps + 1)
    if ls.active > 2:
        _sweep(ls, lo)
        _deflate(ls, eps)
    ls.double_steps += 1


def _mark_converged(ls: _Loop, eps: float, step: int) -> None:
    """Advance each matrix's private deflation schedule and record when it
    reaches the closed-form 2x2 stage.

    The batch-wide gate shrinks everyone at the pace of the slowest
    matrix; this bookkeeping instead cascades a virtual active dimension
    per matrix through its own couplings, giving the double step at which
    the matrix would have finished had it gated alone.  Sampled at the
    collapse phase, right after the trailing-shift sweep.
    """
    pending = ls.converged < 0
    if not pending.any():
        return
    while True:
        idx = ls.virtual_active - 2
        gate = np.abs(np.take_along_axis(ls.e, idx[:, None], axis=1))[:, 0]
        shrink = (ls.virtual_active > 2) & (gate < eps)
        if not shrink.any():
            break
        ls.virtual_active[shrink] -= 1
    done = pending & (ls.virtual_active <= 2)
    ls.converged[done] = step


def _deflate(ls: _Loop, eps: float) -> None:
    while ls.active > 2:
        if float(np.abs(ls.e[:, ls.active - 2]).max()) >= eps:
            break
        ls.active -= 1
        ls.reductions += 1


def _raise_no_convergence(ls: _Loop, eps: float) -> None:
    resid = np.abs(ls.e[:, : ls.active - 1])
    per_matrix = resid.max(axis=1)
    offenders = np.nonzero(per_matrix >= eps)[0]
    raise NoConvergence(offenders.tolist(), float(per_matrix.max()))


def _finalize(ls: _Loop) -> None:
    if ls.active == 2:
        lo, hi, c, s = _wilkinson_cs(ls.d[:, 0], ls.e[:, 0], ls.d[:, 1])
        ls.d[:, 0] = lo
        ls.d[:, 1] = hi
        ls.e[:, 0] = 0.0
        if ls.q is not None:
            _fold_rotation(ls.q, c, s, 0)
    ls.active = 0


# --------------------------------------------------------------------------
# value-semantics wrappers over the loop kernels


def initial_state(t: TridiagonalBatch, compute_vectors: bool = True) -> SweepState:
    """Fresh sweep state: full active block, identity Q, zeroed counters."""
    b, n = t.batch, t.dim
    q = None
    if compute_vectors:
        q = BatchedMatrix(np.broadcast_to(np.eye(n), (b, n, n)).copy())
    return SweepState(t=t, q=q, active_dim=n, deflated=np.zeros((b, n)))


def _loop_from_state(state: SweepState) -> tuple[_Loop, int]:
    b = state.t.batch
    n = state.total_dim
    m = state.active_dim
    d = np.zeros((b, n))
    e = np.zeros((b, max(n - 1, 0)))
    d[:, :m] = state.t.diag
    d[:, m:] = state.deflated[:, m:]
    if m > 1:
        e[:, : m - 1] = state.t.offdiag
    q = state.q.data.copy() if state.q is not None else None
    return (
        _Loop(d, e, q, m, state.reductions, state.double_steps, state.rotation_count),
        n,
    )


def _state_from_loop(ls: _Loop, n: int) -> SweepState:
    m = ls.active
    t = TridiagonalBatch(ls.d[:, :m], ls.e[:, : max(m - 1, 0)])
    deflated = np.zeros_like(ls.d)
    deflated[:, m:] = ls.d[:, m:]
    q = BatchedMatrix(ls.q) if ls.q is not None else None
    return SweepState(
        t=t,
        q=q,
        active_dim=m,
        deflated=deflated,
        reductions=ls.reductions,
        double_steps=ls.double_steps,
        rotation_count=ls.rotation_count,
    )


def shifted_sweep(state: SweepState, mu) -> SweepState:
    """One explicit QR sweep of the active block with shift ``mu``.

    Generates exactly active_dim - 1 rotations left to right, each against
    the running partially transformed matrix, and preserves the eigenvalue
    multiset.  Accumulated eigenvectors (when present) absorb the rotations
    through two-column updates.
    """
    if state.active_dim < 2:
        raise ValueError("shifted_sweep needs an active block of dim >= 2")
    ls, n = _loop_from_state(state)
    mu = np.broadcast_to(np.asarray(mu, dtype=np.float64), (ls.d.shape[0],))
    _sweep(ls, mu)
    return _state_from_loop(ls, n)


def double_shift_step(state: SweepState) -> SweepState:
    """Two consecutive sweeps shifted by the trailing-block eigenvalue pair.

    The pair is extracted once; the half-step result feeds the second sweep
    directly.  mu_hi (nearer the trailing diagonal entry) is applied first.
    """
    if state.active_dim < 3:
        raise ValueError("double_shift_step needs an active block of dim >= 3")
    ls, n = _loop_from_state(state)
    _double_step(ls)
    return _state_from_loop(ls, n)


def try_deflate(state: SweepState, eps: float) -> SweepState:
    """Shrink while the batch-wide max trailing sub-diagonal is below eps.

    Locking is all-or-nothing across the batch: only when every matrix has
    its trailing coupling under the threshold does the trailing diagonal
    entry lock and the active dimension drop.  Repeats until the gate fails
    or only a 2x2 block remains.
    """
    if eps < 0:
        raise ValueError("deflation threshold must be nonnegative")
    ls, n = _loop_from_state(state)
    _deflate(ls, eps)
    return _state_from_loop(ls, n)


def finalize_small(state: SweepState) -> SweepState:
    """Close out an active block of dim <= 2 exactly.

    A 2x2 block is diagonalized in closed form (its rotation folded into Q);
    a scalar locks directly.  The active dimension becomes 0.
    """
    if state.active_dim > 2:
        raise ValueError("finalize_small needs an active block of dim <= 2")
    ls, n = _loop_from_state(state)
    _finalize(ls)
    return _state_from_loop(ls, n)


def diagonalize(t: TridiagonalBatch, cfg: SolverConfig | None = None) -> DiagonalizeResult:
    """Run the full shifted-QR loop on a tridiagonal batch.

    Alternates double-shift steps with deflation checks (the gate is
    sampled after every sweep, see :func:`_gated_double_step`) until only
    a 2x2 block remains, then closes it out exactly.  Each matrix is
    equilibrated by a power of two covering its band before the loop (and
    rescaled after), so ``deflation_tol`` gates couplings relative to the
    matrix's own magnitude.  Raises NoConvergence when the double-step
    budget runs out with couplings still above threshold.
    """
    cfg = cfg or SolverConfig()
    return _diagonalize_arrays(t.diag.copy(), t.offdiag.copy(), cfg)


def _band_scale(d: np.ndarray, e: np.ndarray, axis: int) -> np.ndarray:
    """Per-matrix power-of-two scale covering the band entries.

    Dividing by an exact power of two touches only exponents, so the
    solve on the equilibrated matrix is the same floating-point problem;
    it makes the deflation threshold act relative to each matrix's
    magnitude instead of penalizing small-scale inputs.
    """
    top = np.abs(d).max(axis=axis)
    if e.size:
        top = np.maximum(top, np.abs(e).max(axis=axis))
    safe = np.where(top > 0, top, 1.0)
    return np.exp2(np.ceil(np.log2(safe)))


def _diagonalize_arrays(d: np.ndarray, e: np.ndarray,
                        cfg: SolverConfig) -> DiagonalizeResult:
    """Loop driver over owned working arrays (consumed in place)."""
    b, n = d.shape
    q = None
    if cfg.compute_vectors:
        q = np.broadcast_to(np.eye(n), (b, n, n)).copy()
    if n >= 3 and _kernels.ENABLED:
        # position-major working layout: every sweep pass runs
        # contiguously over the batch (plain transposed copies; a view
        # could alias read-only input when the batch is a single matrix)
        dt = d.T.copy()
        et = e.T.copy()
        return _diagonalize_transposed(dt, et, cfg, q)

    scale = _band_scale(d, e, axis=1)
    d /= scale[:, None]
    if e.size:
        e /= scale[:, None]
    ls = _Loop(d, e, q, n)
    eps = cfg.deflation_tol
    max_steps = cfg.resolved_max_steps(n)
    if n >= 2:
        exhausted = False
        _deflate(ls, eps)
        if n >= 3:
            _mark_converged(ls, eps, 0)
        while ls.active > 2:
            if ls.double_steps >= max_steps:
                exhausted = True
                break
            _gated_double_step(ls, eps)
        if exhausted:
            if cfg.strict_convergence:
                _raise_no_convergence(ls, eps)
            # fixed-schedule mode: lock the diagonal as-is; the leading
            # 2x2 block still closes exactly below
            ls.active = 2
        _finalize(ls)

    steps = ls.double_steps
    mean_r = ls.step_r_sum / steps if steps else 0.0
    converged = np.where(ls.converged < 0, steps, ls.converged)
    diag = SolveDiagnostics(
        double_steps=steps,
        reductions=mean_r,
        reduction_events=ls.reductions,
        rotation_count=ls.rotation_count,
        converged_steps=converged,
    )
    qv = BatchedMatrix(ls.q) if ls.q is not None else None
    return DiagonalizeResult(eigenvalues=ls.d * scale[:, None], q=qv,
                             diagnostics=diag)


def _diagonalize_transposed(dt: np.ndarray, et: np.ndarray, cfg: SolverConfig,
                            q: np.ndarray | None = None) -> DiagonalizeResult:
    """Kernel-path driver over owned position-major arrays (n, batch)."""
    n, b = dt.shape
    scale = _band_scale(dt, et, axis=0)
    dt /= scale[None, :]
    et /= scale[None, :]
    eps = cfg.deflation_tol
    max_steps = cfg.resolved_max_steps(n)
    qarr = q if q is not None else _DUMMY_Q
    use_q = q is not None
    (active, reductions, double_steps, rotation_count,
     step_r_sum, converged, status) = _kernels.qr_loop_kernel(
        dt, et, qarr, use_q, eps, max_steps)
    if status and cfg.strict_convergence:
        ls = _Loop(np.ascontiguousarray(dt.T), np.ascontiguousarray(et.T),
                   q, int(active))
        _raise_no_convergence(ls, eps)
    final_active = 2 if status else int(active)
    if final_active == 2:
        _kernels.finalize_kernel(dt, et, qarr, use_q)
    steps = int(double_steps)
    mean_r = int(step_r_sum) / steps if steps else 0.0
    diag = SolveDiagnostics(
        double_steps=steps,
        reductions=mean_r,
        reduction_events=int(reductions),
        rotation_count=int(rotation_count),
        converged_steps=np.where(converged < 0, steps, converged),
    )
    qv = BatchedMatrix(q) if q is not None else None
    return DiagonalizeResult(
        eigenvalues=np.ascontiguousarray(dt.T) * scale[:, None], q=qv,
        diagnostics=diag,
    )
