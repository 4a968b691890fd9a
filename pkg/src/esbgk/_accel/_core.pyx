# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: fused single-pass loops with Neumaier-compensated
summation (summation order fixed by node index, so results are reproducible
across platforms and thread counts). Cell-level OpenMP parallelism only;
no cross-cell reductions."""
from cython.parallel import prange
from libc.math cimport exp, log

import numpy as np

NAME = "compiled"


cdef inline void _neumaier_add(double x, double* s, double* comp) noexcept nogil:
    cdef double t = s[0] + x
    if (s[0] if s[0] >= 0 else -s[0]) >= (x if x >= 0 else -x):
        comp[0] += (s[0] - t) + x
    else:
        comp[0] += (x - t) + s[0]
    s[0] = t


def weighted_dot(const double[::1] w, const double[::1] a, const double[::1] b):
    """Compensated sum(w * a * b)."""
    cdef Py_ssize_t k, n = w.shape[0]
    cdef double s = 0.0, comp = 0.0
    for k in range(n):
        _neumaier_add(w[k] * a[k] * b[k], &s, &comp)
    return s + comp


def moments_batch(const double[:, ::1] psi, const double[::1] w, const double[:, ::1] F):
    """(C, M) compensated quadrature moments of F rows against psi rows."""
    cdef Py_ssize_t C = F.shape[0], M = psi.shape[0], N = psi.shape[1]
    out_np = np.empty((C, M))
    cdef double[:, ::1] out = out_np
    cdef Py_ssize_t c, a, k
    cdef double s, comp, fv
    with nogil:
        for c in prange(C, schedule="static"):
            for a in range(M):
                s = 0.0
                comp = 0.0
                for k in range(N):
                    _neumaier_add(w[k] * F[c, k] * psi[a, k], &s, &comp)
                out[c, a] = s + comp
    return out_np


def weighted_gram(const double[:, ::1] psi, const double[::1] w, const double[:, ::1] g):
    """(C, M, M) Gram matrices sum_k w_k g_k psi_a psi_b.

    Plain (order-fixed) accumulation: this kernel only builds Newton
    Jacobians, where a preconditioner-grade result suffices; the moment
    residuals themselves go through the compensated moments_batch.
    """
    cdef Py_ssize_t C = g.shape[0], M = psi.shape[0], N = psi.shape[1]
    out_np = np.zeros((C, M, M))
    cdef double[:, :, ::1] out = out_np
    cdef Py_ssize_t c, a, b, k
    cdef double wg, pa
    with nogil:
        for c in prange(C, schedule="static"):
            for k in range(N):
                wg = w[k] * g[c, k]
                for a in range(M):
                    pa = wg * psi[a, k]
                    for b in range(a, M):
                        out[c, a, b] += pa * psi[b, k]
            for a in range(M):
                for b in range(a + 1, M):
                    out[c, b, a] = out[c, a, b]
    return out_np


def gaussian_eval(const double[:, ::1] nodes, const double[::1] rho, const double[:, ::1] U,
                  const double[:, :, ::1] chol, const double[::1] log_norm):
    """Anisotropic Gaussian samples; exponent via forward substitution."""
    cdef Py_ssize_t C = rho.shape[0], N = nodes.shape[0]
    out_np = np.empty((C, N))
    cdef double[:, ::1] out = out_np
    cdef Py_ssize_t c, k
    cdef double d0, d1, d2, y0, y1, y2, pref
    cdef double l00, l10, l11, l20, l21, l22, u0, u1, u2
    with nogil:
        for c in prange(C, schedule="static"):
            l00 = chol[c, 0, 0]; l10 = chol[c, 1, 0]; l11 = chol[c, 1, 1]
            l20 = chol[c, 2, 0]; l21 = chol[c, 2, 1]; l22 = chol[c, 2, 2]
            u0 = U[c, 0]; u1 = U[c, 1]; u2 = U[c, 2]
            pref = rho[c] * exp(log_norm[c])
            for k in range(N):
                d0 = nodes[k, 0] - u0
                d1 = nodes[k, 1] - u1
                d2 = nodes[k, 2] - u2
                y0 = d0 / l00
                y1 = (d1 - l10 * y0) / l11
                y2 = (d2 - l20 * y0 - l21 * y1) / l22
                out[c, k] = pref * exp(-0.5 * (y0 * y0 + y1 * y1 + y2 * y2))
    return out_np


def tilt_apply(const double[:, ::1] g, const double[:, ::1] psi, const double[:, ::1] lam):
    """g * exp(sum_a lam[c, a] psi[a, :]) per cell."""
    cdef Py_ssize_t C = g.shape[0], M = psi.shape[0], N = psi.shape[1]
    out_np = np.empty((C, N))
    cdef double[:, ::1] out = out_np
    cdef Py_ssize_t c, a, k
    cdef double e
    with nogil:
        for c in prange(C, schedule="static"):
            for k in range(N):
                e = 0.0
                for a in range(M):
                    e = e + lam[c, a] * psi[a, k]
                out[c, k] = g[c, k] * exp(e)
    return out_np


def upwind_sweep(const double[:, ::1] F, const double[::1] cou):
    """First-order upwind advection over the (periodic) cell index."""
    cdef Py_ssize_t C = F.shape[0], N = F.shape[1]
    out_np = np.empty((C, N))
    cdef double[:, ::1] out = out_np
    cdef Py_ssize_t c, k, cm, cp
    cdef double cv
    with nogil:
        for c in prange(C, schedule="static"):
            cm = c - 1 if c > 0 else C - 1
            cp = c + 1 if c < C - 1 else 0
            for k in range(N):
                cv = cou[k]
                if cv >= 0.0:
                    out[c, k] = F[c, k] - cv * (F[c, k] - F[cm, k])
                else:
                    out[c, k] = F[c, k] - cv * (F[cp, k] - F[c, k])
    return out_np


def entropy_sums(const double[::1] w, const double[:, ::1] F):
    """Per-cell compensated sum(w F log F) over F > 0, and counts of F <= 0."""
    cdef Py_ssize_t C = F.shape[0], N = F.shape[1]
    sums_np = np.empty(C)
    counts_np = np.zeros(C, dtype=np.int64)
    cdef double[::1] sums = sums_np
    cdef long long[::1] counts = counts_np
    cdef Py_ssize_t c, k
    cdef double s, comp, v
    with nogil:
        for c in prange(C, schedule="static"):
            s = 0.0
            comp = 0.0
            for k in range(N):
                v = F[c, k]
                if v > 0.0:
                    _neumaier_add(w[k] * v * log(v), &s, &comp)
                else:
                    counts[c] += 1
            sums[c] = s + comp
    return sums_np, counts_np


def relax_combine(const double[:, ::1] F, const double[:, ::1] M, const double[::1] coef):
    """(F + coef M) / (1 + coef) per cell."""
    cdef Py_ssize_t C = F.shape[0], N = F.shape[1]
    out_np = np.empty((C, N))
    cdef double[:, ::1] out = out_np
    cdef Py_ssize_t c, k
    cdef double a, inv
    with nogil:
        for c in prange(C, schedule="static"):
            a = coef[c]
            inv = 1.0 / (1.0 + a)
            for k in range(N):
                out[c, k] = (F[c, k] + a * M[c, k]) * inv
    return out_np
