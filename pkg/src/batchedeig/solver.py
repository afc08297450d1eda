"""Facade composing tridiagonalization and QR diagonalization into the full
batched eigendecomposition A = V diag(w) V^T, plus spectral matrix powers
and ZCA whitening built on top of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    BatchedMatrix,
    BatchedSymmetric,
    NonFinite,
    NonPositiveSpectrum,
    SolverConfig,
    validate,
)
from . import _kernels
from .householder import (
    _band_of,
    _reduce,
    accumulate_reflectors,
    tridiagonalize,
    wy_accumulate,
)
from .qr import (
    SolveDiagnostics,
    _diagonalize_arrays,
    _diagonalize_transposed,
    diagonalize,
)

__all__ = ["EigenResult", "batched_eig", "matrix_power", "zca_whiten"]


@dataclass(frozen=True)
class EigenResult:
    """Batched eigendecomposition output.

    ``eigenvalues`` has shape (batch, n), ordered per the solve config;
    ``eigenvectors`` pairs column j with eigenvalue j and is None on the
    eigenvalue-only path.  Column signs are normalized: each column's entry
    of largest magnitude is nonnegative (first such entry on ties).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None
    diagnostics: SolveDiagnostics

    def __post_init__(self):
        w = np.asarray(self.eigenvalues, dtype=np.float64)
        object.__setattr__(self, "eigenvalues", w)
        if self.eigenvectors is not None:
            v = np.asarray(self.eigenvectors, dtype=np.float64)
            object.__setattr__(self, "eigenvectors", v)


def _sort_and_sign(values, vectors, order: str):
    if vectors is None:
        if order == "descending":
            return -np.sort(-values, axis=1), None
        if order == "ascending":
            return np.sort(values, axis=1), None
        return values, None
    if order != "none":
        direction = -values if order == "descending" else values
        perm = np.argsort(direction, axis=1, kind="stable")
        values = np.take_along_axis(values, perm, axis=1)
        vectors = np.take_along_axis(vectors, perm[:, None, :], axis=2)
    lead = np.argmax(np.abs(vectors), axis=1)
    signs = np.take_along_axis(vectors, lead[:, None, :], axis=1)[:, 0, :]
    flip = np.where(signs < 0, -1.0, 1.0)
    vectors = vectors * flip[:, None, :]
    return values, vectors


def batched_eig(a: BatchedSymmetric, cfg: SolverConfig | None = None) -> EigenResult:
    """Full eigendecomposition of a batch of symmetric matrices.

    Pipeline: validate, tridiagonalize by Householder reflections,
    diagonalize by double-shifted QR, then compose eigenvectors as
    V = P Q and sort/sign-normalize.  With ``compute_vectors`` off only
    the eigenvalues are computed and ``eigenvectors`` is None.
    """
    cfg = cfg or SolverConfig()
    if cfg.compute_vectors:
        tri, refl = tridiagonalize(a, cfg)  # validates and symmetrizes
        res = diagonalize(tri, cfg)
        block = cfg.resolved_wy_block(a.dim)
        p = wy_accumulate(refl, block) if block else accumulate_reflectors(refl)
        vectors = p.data @ res.q.data
    else:
        # same stages without the intermediate value types; per-matrix
        # arithmetic is identical to the composed path above, run in the
        # batch-inner layout end to end
        validated = validate(a, cfg)
        b, n = validated.batch, validated.dim
        if n >= 3 and _kernels.ENABLED:
            wt = validated.data.transpose(1, 2, 0).copy()
            dt = np.empty((n, b))
            et = np.empty((n - 1, b))
            _kernels.reduce_band_kernel(wt, dt, et)
            res = _diagonalize_transposed(dt, et, cfg)
        else:
            work, _vectors, _norms = _reduce(validated)
            diag, offdiag = _band_of(work)
            res = _diagonalize_arrays(diag, offdiag, cfg)
        vectors = None
    values, vectors = _sort_and_sign(res.eigenvalues, vectors, cfg.sort)
    return EigenResult(values, vectors, res.diagnostics)


def matrix_power(e: EigenResult, p: float, floor: float | None = None) -> BatchedMatrix:
    """Spectral power V diag(max(w, floor)^p) V^T of a decomposed batch.

    ``floor=None`` applies the default guard 1e-12 * lambda_max per matrix;
    pass 0.0 to disable flooring, in which case a non-positive eigenvalue
    raises NonPositiveSpectrum whenever p is negative or fractional.
    """
    if e.eigenvectors is None:
        raise ValueError("matrix_power needs an EigenResult with eigenvectors")
    if floor is not None and floor < 0:
        raise ValueError("floor must be nonnegative")
    w = e.eigenvalues
    if floor is None:
        floor_arr = 1e-12 * w.max(axis=1, keepdims=True)
        clamped = np.maximum(w, floor_arr)
    else:
        clamped = np.maximum(w, floor)
    needs_positive = p < 0 or not float(p).is_integer()
    if needs_positive:
        mins = clamped.min(axis=1)
        bad = np.nonzero(mins <= 0)[0]
        if bad.size:
            k = int(bad[0])
            raise NonPositiveSpectrum(k, float(w[k].min()))
    powered = clamped ** p
    v = e.eigenvectors
    out = (v * powered[:, None, :]) @ v.transpose(0, 2, 1)
    out = (out + out.transpose(0, 2, 1)) / 2.0
    return BatchedMatrix(out)


def zca_whiten(x: BatchedMatrix, eps_reg: float, cfg: SolverConfig | None = None) -> BatchedMatrix:
    """Whiten features so the recomputed scatter is the identity.

    ``x`` is (batch, channels, samples).  The unnormalized scatter
    (X - mu)(X - mu)^T + eps_reg I is decomposed and its inverse square
    root applied to the centered features.  With ``eps_reg = 0`` a singular
    scatter surfaces as NonPositiveSpectrum.
    """
    if eps_reg < 0:
        raise ValueError("eps_reg must be nonnegative")
    data = x.data
    finite = np.isfinite(data)
    if not finite.all():
        b, i, j = np.argwhere(~finite)[0]
        raise NonFinite(int(b), (int(i), int(j)))
    mu = data.mean(axis=2, keepdims=True)
    centered = data - mu
    scatter = centered @ centered.transpose(0, 2, 1)
    scatter = (scatter + scatter.transpose(0, 2, 1)) / 2.0
    if eps_reg:
        scatter = scatter + eps_reg * np.eye(x.dim_rows)[None]
    decomposition = batched_eig(BatchedSymmetric(scatter), cfg)
    inv_root = matrix_power(decomposition, -0.5, floor=0.0)
    return BatchedMatrix(inv_root.data @ centered)
