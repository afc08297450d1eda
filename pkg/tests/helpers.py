"""Shared test machinery: dense-rotation reference implementations.

The production sweep works on the compact band with constant-size windows;
these helpers redo the same explicit shifted QR with full (batch, n, n)
rotation matrices and full matrix products.  They are deliberately naive:
agreement between the two routes is what validates the windowed updates.
"""

from __future__ import annotations

import numpy as np


def embed_rotation(c, s, pos, n):
    """Dense (batch, n, n) rotation acting in the (pos, pos+1) plane."""
    b = c.shape[0]
    g = np.broadcast_to(np.eye(n), (b, n, n)).copy()
    g[:, pos, pos] = c
    g[:, pos, pos + 1] = s
    g[:, pos + 1, pos] = -s
    g[:, pos + 1, pos + 1] = c
    return g


def generate_rotation(x1, x2):
    """Same generation rule as the production sweep (zero-target shortcut)."""
    live = x2 != 0
    r = np.hypot(x1, x2)
    denom = np.where(live, np.where(r > 0, r, 1.0), 1.0)
    c = np.where(live, x1 / denom, 1.0)
    s = np.where(live, -x2 / denom, 0.0)
    return c, s


def dense_shifted_sweep(t_dense, mu):
    """Explicit shifted QR sweep via dense rotations.

    Returns (t_next, rotations) where rotations is the list of (c, s)
    pairs in generation order.  Mirrors the production algorithm: rotations
    are generated against the running left-rotated matrix, then applied
    from the right in the same order.
    """
    b, n, _ = t_dense.shape
    eye = np.eye(n)
    work = t_dense - mu[:, None, None] * eye
    rotations = []
    for i in range(n - 1):
        c, s = generate_rotation(work[:, i, i].copy(), work[:, i + 1, i].copy())
        rotations.append((c, s))
        g = embed_rotation(c, s, i, n)
        work = g.transpose(0, 2, 1) @ work
    for i, (c, s) in enumerate(rotations):
        work = work @ embed_rotation(c, s, i, n)
    return work + mu[:, None, None] * eye, rotations


def dense_double_step(t_dense, mu_hi, mu_lo, q_dense):
    """Double-shift step with dense rotations, folding Q densely."""
    work, rot_hi = dense_shifted_sweep(t_dense, mu_hi)
    work, rot_lo = dense_shifted_sweep(work, mu_lo)
    n = t_dense.shape[1]
    q = q_dense
    for i, (c, s) in enumerate(rot_hi):
        q = q @ embed_rotation(c, s, i, n)
    for i, (c, s) in enumerate(rot_lo):
        q = q @ embed_rotation(c, s, i, n)
    return work, q


def explicit_reflection(a, u):
    """Two-sided H A H with H = I - 2 u u^T / ||u||^2 formed densely."""
    norm2 = (u * u).sum(axis=-1)
    b, n = u.shape
    h = np.broadcast_to(np.eye(n), (b, n, n)).copy()
    live = norm2 > 0
    scale = np.where(live, 2.0 / np.where(live, norm2, 1.0), 0.0)
    h -= scale[:, None, None] * u[:, :, None] * u[:, None, :]
    return h @ a @ h


def random_symmetric(rng, batch, dim, scale=1.0):
    raw = rng.standard_normal((batch, dim, dim)) * scale
    return (raw + raw.transpose(0, 2, 1)) / 2.0


def random_spd_tridiagonal(rng, batch, dim):
    """SPD batch reduced to tridiagonal form (via the library path)."""
    from batchedeig import BatchedSymmetric, tridiagonalize

    raw = rng.standard_normal((batch, dim, dim))
    spd = raw @ raw.transpose(0, 2, 1) + dim * np.eye(dim)
    tri, _ = tridiagonalize(BatchedSymmetric(spd))
    return tri
