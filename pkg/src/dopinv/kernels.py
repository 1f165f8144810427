"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The backend is chosen at import time: numba is used when it imports cleanly
and the environment variable ``DOPINV_PURE_NUMPY`` is unset (or "0"). Both
implementations of every kernel are importable by name so they can be
benchmarked against each other (see ``benchmarks/bench_kernels.py``).

All kernels operate on the 5-point stencil representation of the elliptic
systems: ``diag`` (n, n) holds row diagonals, ``face_x`` (n, n-1) and
``face_y`` (n-1, n) hold the (positive) off-diagonal couplings between
x- and y-adjacent cells. The matrix action is

    (A w)[j, i] = diag[j, i] * w[j, i]
                  - face_x couplings with w[j, i-1], w[j, i+1]
                  - face_y couplings with w[j-1, i], w[j+1, i]
"""

from __future__ import annotations

import math
import os

import numpy as np

_env = os.environ.get("DOPINV_PURE_NUMPY", "").strip().lower()
_want_numba = _env in ("", "0", "false", "no")

if _want_numba:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _njit = None
else:
    _njit = None

NUMBA_ENABLED = _njit is not None

_BIG = 1.0e30  # "unset" marker for the eikonal sweeps


# ---------------------------------------------------------------------------
# stencil matvec
# ---------------------------------------------------------------------------

def stencil_matvec_numpy(diag, face_x, face_y, w):
    """Return A @ w for the 5-point stencil (diag, face_x, face_y)."""
    out = diag * w
    out[:, :-1] -= face_x * w[:, 1:]
    out[:, 1:] -= face_x * w[:, :-1]
    out[:-1, :] -= face_y * w[1:, :]
    out[1:, :] -= face_y * w[:-1, :]
    return out


def _matvec_loops(diag, face_x, face_y, w):
    n = diag.shape[0]
    out = np.empty((n, n))
    for j in range(n):
        for i in range(n):
            acc = diag[j, i] * w[j, i]
            if i > 0:
                acc -= face_x[j, i - 1] * w[j, i - 1]
            if i < n - 1:
                acc -= face_x[j, i] * w[j, i + 1]
            if j > 0:
                acc -= face_y[j - 1, i] * w[j - 1, i]
            if j < n - 1:
                acc -= face_y[j, i] * w[j + 1, i]
            out[j, i] = acc
    return out


# ---------------------------------------------------------------------------
# Jacobi-preconditioned conjugate gradients
# ---------------------------------------------------------------------------

def cg_stencil_numpy(diag, face_x, face_y, b, rtol, max_iter):
    """Solve A x = b by Jacobi-PCG. Returns (x, rel_residual, iterations).

    The returned relative residual is the *true* residual norm divided by
    ||b||; convergence is re-verified against it, not just the recursive
    residual.
    """
    x = np.zeros_like(b)
    bnorm = math.sqrt(float(np.sum(b * b)))
    if bnorm == 0.0:
        return x, 0.0, 0
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = float(np.sum(r * z))
    it = 0
    while it < max_iter:
        ap = stencil_matvec_numpy(diag, face_x, face_y, p)
        alpha = rz / float(np.sum(p * ap))
        x += alpha * p
        r -= alpha * ap
        it += 1
        if it % 50 == 0:  # guard against recursive-residual drift
            r = b - stencil_matvec_numpy(diag, face_x, face_y, x)
        rnorm = math.sqrt(float(np.sum(r * r)))
        if rnorm <= rtol * bnorm:
            r = b - stencil_matvec_numpy(diag, face_x, face_y, x)
            rnorm = math.sqrt(float(np.sum(r * r)))
            if rnorm <= rtol * bnorm:
                return x, rnorm / bnorm, it
        z = r / diag
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    r = b - stencil_matvec_numpy(diag, face_x, face_y, x)
    rnorm = math.sqrt(float(np.sum(r * r)))
    return x, rnorm / bnorm, it


def _cg_loops(diag, face_x, face_y, b, rtol, max_iter):
    # self-contained (matvec inlined) so it compiles to one numba unit
    n = diag.shape[0]
    x = np.zeros((n, n))
    ap = np.empty((n, n))
    bnorm = 0.0
    for j in range(n):
        for i in range(n):
            bnorm += b[j, i] * b[j, i]
    bnorm = math.sqrt(bnorm)
    if bnorm == 0.0:
        return x, 0.0, 0
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = 0.0
    for j in range(n):
        for i in range(n):
            rz += r[j, i] * z[j, i]
    it = 0
    while it < max_iter:
        pap = 0.0
        for j in range(n):
            for i in range(n):
                acc = diag[j, i] * p[j, i]
                if i > 0:
                    acc -= face_x[j, i - 1] * p[j, i - 1]
                if i < n - 1:
                    acc -= face_x[j, i] * p[j, i + 1]
                if j > 0:
                    acc -= face_y[j - 1, i] * p[j - 1, i]
                if j < n - 1:
                    acc -= face_y[j, i] * p[j + 1, i]
                ap[j, i] = acc
                pap += p[j, i] * acc
        alpha = rz / pap
        for j in range(n):
            for i in range(n):
                x[j, i] += alpha * p[j, i]
                r[j, i] -= alpha * ap[j, i]
        it += 1
        recompute = it % 50 == 0
        rnorm = 0.0
        if recompute:
            for j in range(n):
                for i in range(n):
                    acc = diag[j, i] * x[j, i]
                    if i > 0:
                        acc -= face_x[j, i - 1] * x[j, i - 1]
                    if i < n - 1:
                        acc -= face_x[j, i] * x[j, i + 1]
                    if j > 0:
                        acc -= face_y[j - 1, i] * x[j - 1, i]
                    if j < n - 1:
                        acc -= face_y[j, i] * x[j + 1, i]
                    r[j, i] = b[j, i] - acc
                    rnorm += r[j, i] * r[j, i]
        else:
            for j in range(n):
                for i in range(n):
                    rnorm += r[j, i] * r[j, i]
        rnorm = math.sqrt(rnorm)
        if rnorm <= rtol * bnorm:
            rnorm = 0.0
            for j in range(n):
                for i in range(n):
                    acc = diag[j, i] * x[j, i]
                    if i > 0:
                        acc -= face_x[j, i - 1] * x[j, i - 1]
                    if i < n - 1:
                        acc -= face_x[j, i] * x[j, i + 1]
                    if j > 0:
                        acc -= face_y[j - 1, i] * x[j - 1, i]
                    if j < n - 1:
                        acc -= face_y[j, i] * x[j + 1, i]
                    r[j, i] = b[j, i] - acc
                    rnorm += r[j, i] * r[j, i]
            rnorm = math.sqrt(rnorm)
            if rnorm <= rtol * bnorm:
                return x, rnorm / bnorm, it
        rz_new = 0.0
        for j in range(n):
            for i in range(n):
                z[j, i] = r[j, i] / diag[j, i]
                rz_new += r[j, i] * z[j, i]
        beta = rz_new / rz
        for j in range(n):
            for i in range(n):
                p[j, i] = z[j, i] + beta * p[j, i]
        rz = rz_new
    rnorm = 0.0
    for j in range(n):
        for i in range(n):
            acc = diag[j, i] * x[j, i]
            if i > 0:
                acc -= face_x[j, i - 1] * x[j, i - 1]
            if i < n - 1:
                acc -= face_x[j, i] * x[j, i + 1]
            if j > 0:
                acc -= face_y[j - 1, i] * x[j - 1, i]
            if j < n - 1:
                acc -= face_y[j, i] * x[j + 1, i]
            rnorm += (b[j, i] - acc) ** 2
    return x, math.sqrt(rnorm) / bnorm, it


# ---------------------------------------------------------------------------
# signed-distance reinitialization (fast sweeping for |grad d| = 1)
# ---------------------------------------------------------------------------

def _reinit_loops(phi, h):
    """Rebuild phi as the signed distance to its own zero level set.

    Cells with a sign change to a 4-neighbor are frozen at the distance
    obtained by linear interpolation of phi along the crossing edge; the
    rest is filled by Gauss-Seidel sweeps of the Godunov eikonal update.
    The sign convention keeps {phi >= 0} exactly (ties count as positive).
    """
    n = phi.shape[0]
    d = np.full((n, n), _BIG)
    frozen = np.zeros((n, n), dtype=np.uint8)
    any_frozen = False
    for j in range(n):
        for i in range(n):
            pc = phi[j, i]
            best = _BIG
            for k in range(4):
                if k == 0:
                    if i == 0:
                        continue
                    pn = phi[j, i - 1]
                elif k == 1:
                    if i == n - 1:
                        continue
                    pn = phi[j, i + 1]
                elif k == 2:
                    if j == 0:
                        continue
                    pn = phi[j - 1, i]
                else:
                    if j == n - 1:
                        continue
                    pn = phi[j + 1, i]
                if (pc >= 0.0) != (pn >= 0.0):
                    den = abs(pc - pn)
                    est = h * abs(pc) / den if den > 0.0 else 0.0
                    if est < best:
                        best = est
            if best < _BIG:
                d[j, i] = best
                frozen[j, i] = 1
                any_frozen = True
    out = np.empty((n, n))
    if not any_frozen:
        # no interface: keep a constant-sign field of large magnitude
        for j in range(n):
            for i in range(n):
                out[j, i] = 2.0 if phi[j, i] >= 0.0 else -2.0
        return out
    for _ in range(8):  # sweep rounds; distances settle in a few
        changed = False
        for sweep in range(4):
            if sweep == 0:
                j0, j1, js, i0, i1, is_ = 0, n, 1, 0, n, 1
            elif sweep == 1:
                j0, j1, js, i0, i1, is_ = 0, n, 1, n - 1, -1, -1
            elif sweep == 2:
                j0, j1, js, i0, i1, is_ = n - 1, -1, -1, 0, n, 1
            else:
                j0, j1, js, i0, i1, is_ = n - 1, -1, -1, n - 1, -1, -1
            for j in range(j0, j1, js):
                for i in range(i0, i1, is_):
                    if frozen[j, i] == 1:
                        continue
                    if i > 0:
                        a = d[j, i - 1]
                        if i < n - 1 and d[j, i + 1] < a:
                            a = d[j, i + 1]
                    else:
                        a = d[j, i + 1]
                    if j > 0:
                        bm = d[j - 1, i]
                        if j < n - 1 and d[j + 1, i] < bm:
                            bm = d[j + 1, i]
                    else:
                        bm = d[j + 1, i]
                    if abs(a - bm) >= h:
                        cand = (a if a < bm else bm) + h
                    else:
                        cand = 0.5 * (a + bm + math.sqrt(2.0 * h * h - (a - bm) ** 2))
                    if cand < d[j, i]:
                        d[j, i] = cand
                        changed = True
        if not changed:
            break
    for j in range(n):
        for i in range(n):
            out[j, i] = d[j, i] if phi[j, i] >= 0.0 else -d[j, i]
    return out


def reinit_numpy(phi, h):
    """Pure-python reinitialization (fallback path and benchmark reference)."""
    return _reinit_loops(phi, h)


if NUMBA_ENABLED:
    stencil_matvec_numba = _njit(cache=True)(_matvec_loops)
    cg_stencil_numba = _njit(cache=True)(_cg_loops)
    reinit_numba = _njit(cache=True)(_reinit_loops)

    stencil_matvec = stencil_matvec_numba
    cg_stencil = cg_stencil_numba
    signed_distance_reinit = reinit_numba
else:
    stencil_matvec = stencil_matvec_numpy
    cg_stencil = cg_stencil_numpy
    signed_distance_reinit = reinit_numpy
