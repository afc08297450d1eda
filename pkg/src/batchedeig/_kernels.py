"""Compiled inner loops (numba) with transparent numpy fallback.

The batched pipeline is arithmetic-light per step, so a pure-numpy version
is dominated by per-call overhead rather than flops; these kernels run the
per-matrix recurrences in compiled loops so measured cost tracks the
operation counts.  Everything here mirrors the reference numpy
implementations in ``householder.py`` and ``qr.py`` operation for
operation; cross-path agreement is covered by tests.  Set BED_NO_JIT=1 to
force the numpy path.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    import numba
except ImportError:
    numba = None

ENABLED = numba is not None and os.environ.get("BED_NO_JIT", "") not in ("1", "true")

__all__ = ["ENABLED", "tridiagonalize_kernel", "qr_loop_kernel", "jacobi_kernel"]


if numba is not None:
    _njit = numba.njit(cache=True)
else:  # pragma: no cover - exercised only without numba
    def _njit(fn):
        return fn


@_njit
def tridiagonalize_kernel(w, vectors, norms):
    """Householder reduction of each matrix in place.

    ``w`` is (batch, n, n) and becomes the (numerically) tridiagonal
    matrix; unit reflectors land in ``vectors`` (steps, batch, n) with
    their squared norms in ``norms``.
    """
    b, n, _ = w.shape
    p = np.empty(n)
    for k in range(b):
        for i in range(n - 2):
            tail = n - i - 1
            scale = 0.0
            for t in range(tail):
                v = abs(w[k, i + 1 + t, i])
                if v > scale:
                    scale = v
            if scale <= 1e-300:
                continue
            sumsq = 0.0
            for t in range(tail):
                v = w[k, i + 1 + t, i] / scale
                sumsq += v * v
            norm = scale * math.sqrt(sumsq)
            pivot = w[k, i + 1, i]
            sigma = norm if pivot >= 0 else -norm
            u0 = pivot + sigma
            unorm = math.sqrt(2.0 * abs(sigma)) * math.sqrt(abs(u0))
            vectors[i, k, i + 1] = u0 / unorm
            for t in range(1, tail):
                vectors[i, k, i + 1 + t] = w[k, i + 1 + t, i] / unorm
            norms[i, k] = 1.0

            # p = 2 A u on the trailing block, K = u^T p, q = p - K u,
            # A <- A - q u^T - u q^T  (u is unit, zero at row i)
            m = n - i
            for r in range(m):
                acc = 0.0
                for c in range(1, m):
                    acc += w[k, i + r, i + c] * vectors[i, k, i + c]
                p[r] = 2.0 * acc
            kk = 0.0
            for r in range(1, m):
                kk += vectors[i, k, i + r] * p[r]
            for r in range(1, m):
                p[r] = p[r] - kk * vectors[i, k, i + r]  # p now holds q
            # row 0 of the block: u_0 = 0, so only the q u^T term acts
            q0 = p[0]
            for c in range(1, m):
                w[k, i, i + c] -= q0 * vectors[i, k, i + c]
            for r in range(1, m):
                ur = vectors[i, k, i + r]
                qr = p[r]
                w[k, i + r, i] -= ur * q0
                for c in range(1, m):
                    w[k, i + r, i + c] -= qr * vectors[i, k, i + c] + ur * p[c]


@_njit
def reduce_band_kernel(wt, dT, eT):
    """Householder reduction straight to the band, batch-inner layout.

    ``wt`` is the symmetric batch laid out (n, n, batch) so every
    elementwise pass runs contiguously over the batch; the tridiagonal
    band lands in ``dT`` (n, batch) and ``eT`` (n-1, batch).  Per-matrix
    arithmetic is identical to :func:`tridiagonalize_kernel`.
    """
    n = wt.shape[0]
    b = wt.shape[2]
    u = np.zeros((n, b))
    p = np.empty((n, b))
    scale = np.empty(b)
    sumsq = np.empty(b)
    unorm = np.empty(b)
    kk = np.empty(b)
    for i in range(n - 2):
        tail = n - i - 1
        m = n - i
        for k in range(b):
            scale[k] = 0.0
        for t in range(tail):
            row = wt[i + 1 + t, i]
            for k in range(b):
                v = abs(row[k])
                if v > scale[k]:
                    scale[k] = v
        for k in range(b):
            sumsq[k] = 0.0
        for t in range(tail):
            row = wt[i + 1 + t, i]
            for k in range(b):
                sc = scale[k] if scale[k] > 1e-300 else 1.0
                v = row[k] / sc
                sumsq[k] += v * v
        for k in range(b):
            if scale[k] > 1e-300:
                nrm = scale[k] * math.sqrt(sumsq[k])
                piv = wt[i + 1, i, k]
                sg = nrm if piv >= 0 else -nrm
                u0 = piv + sg
                unorm[k] = math.sqrt(2.0 * abs(sg)) * math.sqrt(abs(u0))
                u[i + 1, k] = u0 / unorm[k]
            else:
                # dead tail: reflector is the identity
                unorm[k] = math.inf
                u[i + 1, k] = 0.0
        for t in range(1, tail):
            row = wt[i + 1 + t, i]
            urow = u[i + 1 + t]
            for k in range(b):
                urow[k] = row[k] / unorm[k]

        # p = 2 A u on the trailing block, K = u^T p, q = p - K u,
        # A <- A - q u^T - u q^T  (u is unit or zero, zero at row i)
        for r in range(m):
            prow = p[r]
            for k in range(b):
                prow[k] = 0.0
            for c in range(1, m):
                wrow = wt[i + r, i + c]
                ucol = u[i + c]
                for k in range(b):
                    prow[k] += wrow[k] * ucol[k]
            for k in range(b):
                prow[k] *= 2.0
        for k in range(b):
            kk[k] = 0.0
        for r in range(1, m):
            urow = u[i + r]
            prow = p[r]
            for k in range(b):
                kk[k] += urow[k] * prow[k]
        for r in range(1, m):
            urow = u[i + r]
            prow = p[r]
            for k in range(b):
                prow[k] -= kk[k] * urow[k]  # p now holds q
        q0 = p[0]
        for c in range(1, m):
            wrow = wt[i, i + c]
            ucol = u[i + c]
            for k in range(b):
                wrow[k] -= q0[k] * ucol[k]
        for r in range(1, m):
            urow = u[i + r]
            qrow = p[r]
            wcol = wt[i + r, i]
            for k in range(b):
                wcol[k] -= urow[k] * q0[k]
            for c in range(1, m):
                wrow = wt[i + r, i + c]
                ucol = u[i + c]
                qcol = p[c]
                for k in range(b):
                    wrow[k] -= qrow[k] * ucol[k] + urow[k] * qcol[k]

    for j in range(n):
        src = wt[j, j]
        dst = dT[j]
        for k in range(b):
            dst[k] = src[k]
    for j in range(n - 1):
        src = wt[j + 1, j]
        dst = eT[j]
        for k in range(b):
            dst[k] = src[k]


@_njit
def _wilkinson_scalar(a, bb, d):
    """Shift pair and rotation of [[a, bb], [bb, d]]; see _wilkinson_cs."""
    if bb == 0.0:
        return a, d, 1.0, 0.0
    m = (a - d) / (2.0 * bb)
    sign = 1.0 if m >= 0 else -1.0
    t = -sign / (abs(m) + math.hypot(1.0, m))
    c = 1.0 / math.sqrt(1.0 + t * t)
    s = c * t
    bcs2 = 2.0 * bb * c * s
    lo = a * c * c - bcs2 + d * s * s
    hi = a * s * s + bcs2 + d * c * c
    return lo, hi, c, s


@_njit
def _sweep_block(dT, eT, q, use_q, m, mu,
                 dw, g, c1, s1, c2, r1, u1, cn, sn, rn, un):
    """One shifted QR sweep of every matrix's leading m-block.

    Arrays are position-major (n, batch) so each pass is a contiguous,
    vectorizable run over the batch.  The sweep is fused: rotation i-1 is
    retired (applied from the right) as soon as rotation i has produced
    the R entries it needs, with the in-flight state held in per-matrix
    vectors.  Rotations generate branch-free via the scaled-ratio form; a
    zero sub-diagonal target yields the identity rotation exactly.
    """
    b = dT.shape[1]
    nq = q.shape[1]
    for k in range(b):
        dw[k] = dT[0, k] - mu[k]
        g[k] = eT[0, k]
        c1[k] = 1.0
        s1[k] = 0.0
        c2[k] = 1.0
        r1[k] = 0.0
        u1[k] = 0.0
    for i in range(m - 1):
        for k in range(b):
            ei = eT[i, k]
            dwk = dw[k]
            live = ei != 0.0
            adw = abs(dwk)
            aei = abs(ei)
            am = adw if adw >= aei else aei
            ams = am if am > 0.0 else 1.0
            t1 = dwk / ams
            t2 = ei / ams
            hh = math.sqrt(t1 * t1 + t2 * t2)
            ih = 1.0 / (hh if hh > 0.0 else 1.0)
            c = t1 * ih if live else 1.0
            s = -t2 * ih if live else 0.0
            r = am * hh if live else dwk
            dn = dT[i + 1, k] - mu[k]
            cn[k] = c
            sn[k] = s
            rn[k] = r
            un[k] = c * g[k] - s * dn
            dw[k] = s * g[k] + c * dn
        if i > 0:
            for k in range(b):
                dT[i - 1, k] = c1[k] * (c2[k] * r1[k]) - s1[k] * u1[k] + mu[k]
                eT[i - 1, k] = -s1[k] * rn[k]
            if use_q:
                for k in range(b):
                    ck = c1[k]
                    sk = s1[k]
                    for row in range(nq):
                        qp = q[k, row, i - 1]
                        qn_ = q[k, row, i]
                        q[k, row, i - 1] = ck * qp - sk * qn_
                        q[k, row, i] = sk * qp + ck * qn_
        for k in range(b):
            c2[k] = c1[k]
            c1[k] = cn[k]
            s1[k] = sn[k]
            r1[k] = rn[k]
            u1[k] = un[k]
        if i < m - 2:
            for k in range(b):
                g[k] = c1[k] * eT[i + 1, k]
    # retire the last rotation; dw holds rmain[m-1]
    for k in range(b):
        dT[m - 2, k] = c1[k] * (c2[k] * r1[k]) - s1[k] * u1[k] + mu[k]
        eT[m - 2, k] = -s1[k] * dw[k]
        dT[m - 1, k] = c1[k] * dw[k] + mu[k]
    if use_q:
        for k in range(b):
            ck = c1[k]
            sk = s1[k]
            for row in range(nq):
                qp = q[k, row, m - 2]
                qn_ = q[k, row, m - 1]
                q[k, row, m - 2] = ck * qp - sk * qn_
                q[k, row, m - 1] = sk * qp + ck * qn_


@_njit
def _deflate_scan(eT, active, eps):
    """Number of trailing positions whose batch-max coupling is below eps."""
    shrink = 0
    b = eT.shape[1]
    while active - shrink > 2:
        pos = active - shrink - 2
        worst = 0.0
        for k in range(b):
            v = abs(eT[pos, k])
            if v > worst:
                worst = v
        if worst >= eps:
            break
        shrink += 1
    return shrink


@_njit
def qr_loop_kernel(dT, eT, q, use_q, eps, max_steps):
    """The gated double-shift loop, batch-synchronized, position-major.

    ``dT`` is (n, batch) and ``eT`` (n-1, batch).  Returns (active,
    reductions, double_steps, rotation_count, step_r_sum, converged,
    status); status 1 means the step budget ran out with the active block
    above 2.  The 2x2 closeout is left to the caller.
    """
    n, b = dT.shape
    active = n
    reductions = 0
    double_steps = 0
    rotation_count = 0
    step_r_sum = 0
    converged = np.full(b, -1, np.int64)
    virtual_active = np.full(b, n, np.int64)
    his = np.empty(b)
    los = np.empty(b)
    dw = np.empty(b)
    g = np.empty(b)
    c1 = np.empty(b)
    s1 = np.empty(b)
    c2 = np.empty(b)
    r1 = np.empty(b)
    u1 = np.empty(b)
    cn = np.empty(b)
    sn = np.empty(b)
    rn = np.empty(b)
    un = np.empty(b)

    shrink = _deflate_scan(eT, active, eps)
    active -= shrink
    reductions += shrink
    for k in range(b):
        va = virtual_active[k]
        while va > 2 and abs(eT[va - 2, k]) < eps:
            va -= 1
        virtual_active[k] = va
        if va <= 2:
            converged[k] = 0

    status = 0
    while active > 2:
        if double_steps >= max_steps:
            status = 1
            break
        step_r_sum += reductions
        for k in range(b):
            lo, hi, _, _ = _wilkinson_scalar(
                dT[active - 2, k], eT[active - 2, k], dT[active - 1, k]
            )
            los[k] = lo
            his[k] = hi
        _sweep_block(dT, eT, q, use_q, active, his,
                     dw, g, c1, s1, c2, r1, u1, cn, sn, rn, un)
        rotation_count += active - 1
        shrink = _deflate_scan(eT, active, eps)
        active -= shrink
        reductions += shrink
        for k in range(b):
            if converged[k] < 0:
                va = virtual_active[k]
                while va > 2 and abs(eT[va - 2, k]) < eps:
                    va -= 1
                virtual_active[k] = va
                if va <= 2:
                    converged[k] = double_steps + 1
        if active > 2:
            _sweep_block(dT, eT, q, use_q, active, los,
                         dw, g, c1, s1, c2, r1, u1, cn, sn, rn, un)
            rotation_count += active - 1
            shrink = _deflate_scan(eT, active, eps)
            active -= shrink
            reductions += shrink
        double_steps += 1

    return active, reductions, double_steps, rotation_count, step_r_sum, converged, status


@_njit
def finalize_kernel(dT, eT, q, use_q):
    """Exact closeout of the leading 2x2 block of every matrix
    (position-major arrays)."""
    b = dT.shape[1]
    nq = q.shape[1]
    for k in range(b):
        lo, hi, c, s = _wilkinson_scalar(dT[0, k], eT[0, k], dT[1, k])
        dT[0, k] = lo
        dT[1, k] = hi
        eT[0, k] = 0.0
        if use_q:
            for row in range(nq):
                qp = q[k, row, 0]
                qn = q[k, row, 1]
                q[k, row, 0] = c * qp - s * qn
                q[k, row, 1] = s * qp + c * qn


@_njit
def jacobi_kernel(a, v, stop, gate, max_sweeps):
    """Cyclic two-sided Jacobi on one matrix in place; returns 0 on
    convergence (largest off-diagonal at most ``stop``), 1 otherwise."""
    n = a.shape[0]
    for _ in range(max_sweeps):
        worst = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                val = abs(a[i, j])
                if val > worst:
                    worst = val
        if worst <= stop:
            return 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= gate:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                tau = (aqq - app) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                for col in range(n):
                    rp = a[p, col]
                    rq = a[q, col]
                    a[p, col] = c * rp - s * rq
                    a[q, col] = s * rp + c * rq
                for row in range(n):
                    cp = a[row, p]
                    cq = a[row, q]
                    a[row, p] = c * cp - s * cq
                    a[row, q] = s * cp + c * cq
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for row in range(n):
                    vp = v[row, p]
                    vq = v[row, q]
                    v[row, p] = c * vp - s * vq
                    v[row, q] = s * vp + c * vq
    worst = 0.0
    for i in range(n - 1):
        for j in range(i + 1, n):
            val = abs(a[i, j])
            if val > worst:
                worst = val
    return 0 if worst <= stop else 1
