"""Reference eigensolvers and comparators, algorithmically disjoint from
the Householder + QR pipeline.

The cyclic two-sided Jacobi method shares no code with the production path
(no reflectors, no shifts, no deflation), which is what makes it usable as
an oracle.  Closed-form routes cover 2x2 and 3x3 blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .core import NoConvergence, ShapeMismatch

__all__ = [
    "OracleReport",
    "Tolerances",
    "jacobi_eig",
    "closed_form_eig",
    "compare",
]

_TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class Tolerances:
    """Pass/fail gates for :func:`compare`.

    ``eigenvalue`` is relative to the reference spectral radius,
    ``residual`` relative to ||A||_F.  ``angle`` (radians) is reported but
    not gated unless set: eigenvector sensitivity blows up inversely with
    the gap right at the cluster boundary, so a universal angle gate is
    unreliable.
    """

    eigenvalue: float = 1e-8
    residual: float = 1e-10
    angle: float | None = None


@dataclass(frozen=True)
class OracleReport:
    """Per-matrix agreement metrics between a solve and a reference."""

    max_abs_eigenvalue_error: float
    max_subspace_angle: float
    reconstruction_residual: float
    passed: bool


def jacobi_eig(a, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic two-sided Jacobi eigendecomposition of one symmetric matrix.

    Sweeps rotate away each off-diagonal pair until the largest one falls
    below ``tol`` relative to ||A||_F, giving
    ``||A - V diag(w) V^T||_F <= tol ||A||_F``.  Returns (w, V) sorted by
    descending eigenvalue.
    """
    work = np.array(a, dtype=np.float64, copy=True)
    if work.ndim != 2 or work.shape[0] != work.shape[1]:
        raise ShapeMismatch(f"expected one square matrix, got shape {work.shape}")
    n = work.shape[0]
    v = np.eye(n)
    if n == 1:
        return work.diagonal().copy(), v
    fro = float(np.linalg.norm(work))
    if fro == 0.0:
        return np.zeros(n), v
    stop = tol * fro
    gate = 0.01 * stop / n
    if _kernels.ENABLED:
        if _kernels.jacobi_kernel(work, v, stop, gate, max_sweeps):
            off = work.copy()
            np.fill_diagonal(off, 0.0)
            raise NoConvergence([0], float(np.abs(off).max()))
        w = work.diagonal().copy()
        order = np.argsort(-w, kind="stable")
        return w[order], v[:, order]
    converged = False
    for _ in range(max_sweeps):
        off = work.copy()
        np.fill_diagonal(off, 0.0)
        if np.abs(off).max() <= stop:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                if abs(apq) <= gate:
                    continue
                app = work[p, p]
                aqq = work[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rp = work[p, :].copy()
                rq = work[q, :].copy()
                work[p, :] = c * rp - s * rq
                work[q, :] = s * rp + c * rq
                cp = work[:, p].copy()
                cq = work[:, q].copy()
                work[:, p] = c * cp - s * cq
                work[:, q] = s * cp + c * cq
                work[p, p] = app - t * apq
                work[q, q] = aqq + t * apq
                work[p, q] = 0.0
                work[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    if not converged:
        off = work.copy()
        np.fill_diagonal(off, 0.0)
        if np.abs(off).max() > stop:
            raise NoConvergence([0], float(np.abs(off).max()))
    w = work.diagonal().copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def closed_form_eig(a) -> np.ndarray:
    """Eigenvalues of one 2x2 or 3x3 symmetric matrix, exact to round-off.

    2x2 via the quadratic formula; 3x3 via the trigonometric (Cardano)
    solution of the characteristic cubic.  Returned descending.
    """
    m = np.asarray(a, dtype=np.float64)
    if m.shape == (2, 2):
        half_tr = 0.5 * (m[0, 0] + m[1, 1])
        rad = np.hypot(0.5 * (m[0, 0] - m[1, 1]), m[0, 1])
        return np.array([half_tr + rad, half_tr - rad])
    if m.shape == (3, 3):
        p1 = m[0, 1] ** 2 + m[0, 2] ** 2 + m[1, 2] ** 2
        if p1 == 0.0:
            return np.sort(m.diagonal())[::-1].copy()
        q = m.trace() / 3.0
        p2 = (m[0, 0] - q) ** 2 + (m[1, 1] - q) ** 2 + (m[2, 2] - q) ** 2 + 2.0 * p1
        p = np.sqrt(p2 / 6.0)
        b = (m - q * np.eye(3)) / p
        detb = (
            b[0, 0] * (b[1, 1] * b[2, 2] - b[1, 2] * b[2, 1])
            - b[0, 1] * (b[1, 0] * b[2, 2] - b[1, 2] * b[2, 0])
            + b[0, 2] * (b[1, 0] * b[2, 1] - b[1, 1] * b[2, 0])
        )
        r = min(max(detb / 2.0, -1.0), 1.0)
        phi = np.arccos(r) / 3.0
        lam1 = q + 2.0 * p * np.cos(phi)
        lam3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
        lam2 = 3.0 * q - lam1 - lam3
        return np.array([lam1, lam2, lam3])
    raise ShapeMismatch(f"closed form covers 2x2 and 3x3 only, got {m.shape}")


def _cluster_bounds(ref_sorted: np.ndarray, lam_max: float):
    """Split a descending spectrum into clusters of gap < 1e-8 * lam_max."""
    thr = 1e-8 * max(lam_max, _TINY)
    bounds = [0]
    for i in range(1, ref_sorted.shape[0]):
        if ref_sorted[i - 1] - ref_sorted[i] >= thr:
            bounds.append(i)
    bounds.append(ref_sorted.shape[0])
    return bounds


def _subspace_angle(u: np.ndarray, w: np.ndarray) -> float:
    """Largest principal angle between the column spans of u and w."""
    if u.shape[1] == 1:
        dot = abs(float(u[:, 0] @ w[:, 0]))
        return float(np.arccos(min(dot, 1.0)))
    smin = np.linalg.svd(u.T @ w, compute_uv=False)[-1]
    return float(np.arccos(min(max(smin, -1.0), 1.0)))


def compare(result, ref_values, ref_vectors=None, matrix=None,
            tol: Tolerances | None = None) -> list[OracleReport]:
    """Score a solve against reference eigensystems, one report per matrix.

    Eigenvalues are matched after sorting both sets descending.  Vector
    agreement uses sign-invariant angles, with repeated-eigenvalue clusters
    (gap below 1e-8 times the spectral radius) compared by subspace angle
    rather than column by column.  The reconstruction residual needs the
    original ``matrix``; metrics whose inputs are missing report as 0.
    """
    tol = tol or Tolerances()
    vals = np.asarray(result.eigenvalues, dtype=np.float64)
    refs = np.asarray(ref_values, dtype=np.float64)
    if vals.shape != refs.shape:
        raise ShapeMismatch(f"eigenvalue shapes differ: {vals.shape} vs {refs.shape}")
    vecs = None
    if result.eigenvectors is not None and ref_vectors is not None:
        vecs = np.asarray(result.eigenvectors, dtype=np.float64)
        rvecs = np.asarray(ref_vectors, dtype=np.float64)
        if vecs.shape != rvecs.shape or vecs.shape[:2] != vals.shape:
            raise ShapeMismatch("eigenvector shapes do not match eigenvalues")
    if matrix is not None and matrix.data.shape[0] != vals.shape[0]:
        raise ShapeMismatch("matrix batch does not match the result batch")

    reports = []
    for k in range(vals.shape[0]):
        order = np.argsort(-vals[k], kind="stable")
        rorder = np.argsort(-refs[k], kind="stable")
        w = vals[k][order]
        wr = refs[k][rorder]
        err = float(np.abs(w - wr).max())
        lam_max = float(np.abs(wr).max())

        angle = 0.0
        if vecs is not None:
            v = vecs[k][:, order]
            vr = rvecs[k][:, rorder]
            bounds = _cluster_bounds(wr, lam_max)
            for lo, hi in zip(bounds[:-1], bounds[1:]):
                angle = max(angle, _subspace_angle(v[:, lo:hi], vr[:, lo:hi]))

        resid = 0.0
        if matrix is not None and result.eigenvectors is not None:
            a = matrix.data[k]
            v = np.asarray(result.eigenvectors[k], dtype=np.float64)
            recon = (v * np.asarray(result.eigenvalues[k])[None, :]) @ v.T
            denom = max(float(np.linalg.norm(a)), _TINY)
            resid = float(np.linalg.norm(a - recon)) / denom

        ok = err <= tol.eigenvalue * max(lam_max, _TINY)
        ok = ok and resid <= tol.residual
        if tol.angle is not None:
            ok = ok and angle <= tol.angle
        reports.append(OracleReport(err, angle, resid, bool(ok)))
    return reports
