"""Batched tridiagonalization of symmetric matrices by Householder reflections.

Each of the n-2 reflections is applied as a symmetric rank-2 update (one
matrix-vector product plus two rank-1 updates), never as a full two-sided
matrix product.  The orthogonal similarity P accumulating the reflectors can
be formed reflector-by-reflector or in blocks via the compact WY form
I - 2 W Y^T.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import (
    BatchedMatrix,
    BatchedSymmetric,
    BlockTooLarge,
    SolverConfig,
    TridiagonalBatch,
    validate,
)

__all__ = [
    "ReflectorSet",
    "WyFactors",
    "householder_vector",
    "rank2_update",
    "tridiagonalize",
    "accumulate_reflectors",
    "wy_factors",
    "wy_accumulate",
]

# Column tails with norm at or below this are treated as already reduced
# (reflector = identity); guards against division by an underflowed norm.
_ZERO_TAIL = 1e-300


@dataclass(frozen=True)
class ReflectorSet:
    """Unit Householder vectors for one tridiagonalization.

    vectors has shape (dim-2, batch, dim): entry i is the (normalized)
    reflector for step i, with a structural zero prefix of length i+1.
    norms caches the squared norm of each stored vector (1.0 for live
    reflectors, 0.0 for identity steps).
    """

    vectors: np.ndarray
    norms: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        n2 = np.asarray(self.norms, dtype=np.float64)
        if v.ndim != 3 or n2.shape != v.shape[:2]:
            raise ValueError("vectors must be (steps, batch, dim) with matching norms")
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "norms", n2)

    @property
    def steps(self) -> int:
        return self.vectors.shape[0]

    @property
    def batch(self) -> int:
        return self.vectors.shape[1]

    @property
    def dim(self) -> int:
        return self.vectors.shape[2]


@dataclass(frozen=True)
class WyFactors:
    """Compact WY pair: I - 2 W Y^T equals a product of Householder matrices."""

    w: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if w.shape != y.shape or w.ndim != 3:
            raise ValueError("w and y must share a (batch, dim, block) shape")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "y", y)

    def product(self) -> np.ndarray:
        """Densify I - 2 W Y^T to (batch, dim, dim)."""
        b, n, _ = self.w.shape
        return np.eye(n)[None] - 2.0 * (self.w @ self.y.transpose(0, 2, 1))


def _reflector_from_tail(tail: np.ndarray):
    """Unit reflector annihilating tail[1:] onto -sigma e_1.

    Returns (u_tail, sigma) with u_tail of the same shape as tail.  The sign
    of sigma copies the leading tail entry (sign of 0 taken as +1) so the
    pivot accumulates instead of cancelling.  Entries are pre-scaled by the
    largest magnitude so extreme inputs neither overflow nor underflow.
    """
    scale = np.abs(tail).max(axis=-1)
    live = scale > _ZERO_TAIL
    safe = np.where(live, scale, 1.0)
    scaled = tail / safe[:, None]
    norm = safe * np.sqrt((scaled * scaled).sum(axis=-1))
    sigma = np.where(tail[:, 0] >= 0, norm, -norm)
    u = tail.copy()
    u[:, 0] += sigma
    # ||u||^2 = 2 sigma (tail_0 + sigma); both factors carry sigma's sign,
    # and the split square roots keep huge entries from overflowing
    unorm = np.sqrt(2.0 * np.abs(sigma)) * np.sqrt(np.abs(u[:, 0]))
    u = np.where(live[:, None], u / np.where(live, unorm, 1.0)[:, None], 0.0)
    sigma = np.where(live, sigma, 0.0)
    return u, sigma


def _rank2_inplace(block: np.ndarray, u: np.ndarray) -> None:
    """Apply H block H with H = I - 2 u u^T in place; u must be unit or zero."""
    p = 2.0 * (block @ u[:, :, None])[:, :, 0]
    k = (u * p).sum(axis=-1)
    q = p - k[:, None] * u
    block -= q[:, :, None] * u[:, None, :] + u[:, :, None] * q[:, None, :]


def householder_vector(a: BatchedSymmetric, step: int):
    """Reflector for column ``step`` of a partially reduced batch.

    Returns (u, sigma): u is the unit reflector embedded in full dimension
    with zeros through index ``step`` (exactly), and sigma is the signed
    column-tail norm; the reflected sub-diagonal entry becomes -sigma.
    A zero tail yields u = 0 and sigma = 0, meaning H = I.
    """
    n = a.dim
    if not 0 <= step <= n - 3:
        raise ValueError(f"step {step} out of range for dim {n}")
    tail = np.ascontiguousarray(a.data[:, step + 1 :, step])
    u_tail, sigma = _reflector_from_tail(tail)
    u = np.zeros((a.batch, n))
    u[:, step + 1 :] = u_tail
    return u, sigma


def rank2_update(a: BatchedSymmetric, u: np.ndarray, sigma: np.ndarray) -> BatchedSymmetric:
    """Two-sided reflection H A H evaluated as a symmetric rank-2 update.

    Accepts the (u, sigma) pair from :func:`householder_vector`; u need not
    be normalized.  Zero reflectors (sigma = 0) leave their matrix unchanged.
    """
    u = np.asarray(u, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if u.shape != (a.batch, a.dim):
        raise ValueError(f"u must have shape ({a.batch}, {a.dim}), got {u.shape}")
    if not np.any(sigma):
        return a
    scale = np.abs(u).max(axis=-1)
    live = scale > _ZERO_TAIL
    safe = np.where(live, scale, 1.0)
    scaled = u / safe[:, None]
    norm = safe * np.sqrt((scaled * scaled).sum(axis=-1))
    unit = np.where(live[:, None], u / np.where(live, norm, 1.0)[:, None], 0.0)
    work = a.data.copy()
    _rank2_inplace(work, unit)
    return BatchedSymmetric(work)


def tridiagonalize(a: BatchedSymmetric, cfg: SolverConfig | None = None):
    """Reduce a symmetric batch to tridiagonal form with n-2 reflections.

    Returns (TridiagonalBatch, ReflectorSet).  Trace and Frobenius norm are
    preserved (orthogonal similarity); entries outside the band decay to
    round-off and are dropped by the compact storage.  Dims 1 and 2 are
    already tridiagonal and come back unchanged with an empty reflector set.
    """
    a = validate(a, cfg)
    work, vectors, norms = _reduce(a)
    b, n = a.batch, a.dim
    diag, offdiag = _band_of(work)
    tri = TridiagonalBatch(diag, offdiag)
    return tri, ReflectorSet(vectors, norms)


def _reduce(a: BatchedSymmetric):
    """Reduction loop over a validated batch: (work, vectors, norms)."""
    b, n = a.batch, a.dim
    steps = max(n - 2, 0)
    work = a.data.copy()
    vectors = np.zeros((steps, b, n))
    norms = np.zeros((steps, b))
    if steps and _kernels.ENABLED:
        _kernels.tridiagonalize_kernel(work, vectors, norms)
    else:
        for i in range(steps):
            tail = np.ascontiguousarray(work[:, i + 1 :, i])
            u_tail, sigma = _reflector_from_tail(tail)
            vectors[i, :, i + 1 :] = u_tail
            norms[i] = (u_tail * u_tail).sum(axis=-1)
            u_act = np.zeros((b, n - i))
            u_act[:, 1:] = u_tail
            _rank2_inplace(work[:, i:, i:], u_act)
    return work, vectors, norms


def _band_of(work: np.ndarray):
    """Compact (diag, offdiag) of the numerically tridiagonal result."""
    b, n, _ = work.shape
    idx = np.arange(n)
    diag = work[:, idx, idx]
    offdiag = work[:, idx[1:], idx[:-1]] if n > 1 else np.zeros((b, 0))
    return diag, offdiag


def accumulate_reflectors(refl: ReflectorSet) -> BatchedMatrix:
    """Form the orthogonal P as the ordered product of the reflectors.

    With H_i = I - 2 u_i u_i^T this is P = H_0 H_1 ... applied left to
    right, so that P^T A P re-densifies to the tridiagonal batch.  An empty
    set yields the identity.
    """
    b, n = refl.batch, refl.dim
    p = np.broadcast_to(np.eye(n), (b, n, n)).copy()
    for i in range(refl.steps):
        u = refl.vectors[i]
        # columns before i+1 are structurally untouched by this reflector
        cols = p[:, :, i + 1 :]
        pu = cols @ u[:, i + 1 :, None]
        cols -= 2.0 * pu * u[:, None, i + 1 :]
    return BatchedMatrix(p)


def wy_factors(refl: ReflectorSet, block: int) -> list[WyFactors]:
    """Split the reflector sequence into blocks and build each WY pair.

    Block j collects consecutive unit reflectors v_0..v_{m-1}; the recurrence
    W <- [W | prod(v_k)] , Y <- [Y | v_k] keeps I - 2 W Y^T equal to the
    ordered product of the block.
    """
    if not 1 <= block <= max(refl.dim - 2, 0):
        raise BlockTooLarge(
            f"block size {block} not in [1, {max(refl.dim - 2, 0)}] for dim {refl.dim}"
        )
    b, n = refl.batch, refl.dim
    out = []
    for start in range(0, refl.steps, block):
        stop = min(start + block, refl.steps)
        width = stop - start
        w = np.zeros((b, n, width))
        y = np.zeros((b, n, width))
        for j in range(width):
            v = refl.vectors[start + j]
            y[:, :, j] = v
            if j == 0:
                w[:, :, 0] = v
            else:
                yv = y[:, :, :j].transpose(0, 2, 1) @ v[:, :, None]
                w[:, :, j] = v - 2.0 * (w[:, :, :j] @ yv)[:, :, 0]
        out.append(WyFactors(w, y))
    return out


def wy_accumulate(refl: ReflectorSet, block: int) -> BatchedMatrix:
    """Accumulate P through blocked WY products; equals the plain product."""
    b, n = refl.batch, refl.dim
    p = np.broadcast_to(np.eye(n), (b, n, n)).copy()
    for pair in wy_factors(refl, block):
        pw = p @ pair.w
        p = p - 2.0 * (pw @ pair.y.transpose(0, 2, 1))
    return BatchedMatrix(p)
