"""Vectorized NumPy implementations of the hot kernels.

Signature-compatible with the compiled extension ``esbgk._accel._core``.
All kernels are deterministic for fixed inputs on a given platform (BLAS
reductions have a fixed summation schedule per build); the compiled twin
additionally uses compensated summation, which is platform-stable.
"""
import math

import numpy as np

NAME = "numpy"


def weighted_dot(w, a, b):
    """Compensated scalar quadrature sum(w * a * b).

    Uses exact float summation (math.fsum) so the result does not depend on
    a library reduction order. Scalar path only; batch paths use BLAS.
    """
    return math.fsum(np.asarray(w) * np.asarray(a) * np.asarray(b))


def moments_batch(psi, w, F):
    """Quadrature moments of each row of F against the rows of psi.

    psi: (M, N) sampled weight functions, w: (N,) quadrature weights,
    F: (C, N) field values per cell. Returns (C, M).
    """
    return (F * w) @ psi.T


def weighted_gram(psi, w, g):
    """Per-cell Gram matrices sum_k w_k g_k psi_a(k) psi_b(k) -> (C, M, M)."""
    C = g.shape[0]
    M = psi.shape[0]
    out = np.empty((C, M, M))
    for c in range(C):
        pw = psi * (w * g[c])
        out[c] = pw @ psi.T
    return out


def gaussian_eval(nodes, rho, U, chol, log_norm):
    """Sample anisotropic Gaussians at the velocity nodes.

    nodes: (N, 3); rho: (C,); U: (C, 3); chol: (C, 3, 3) lower-triangular
    Cholesky factors of the covariance tensors; log_norm: (C,) values of
    -0.5*log(det(2*pi*Sigma)). The exponent is formed by forward
    substitution against the Cholesky factor (no explicit inverse).
    """
    n0, n1, n2 = nodes[:, 0], nodes[:, 1], nodes[:, 2]
    L = chol
    y0 = (n0 - U[:, 0, None]) / L[:, 0, 0, None]
    y1 = (n1 - U[:, 1, None] - L[:, 1, 0, None] * y0) / L[:, 1, 1, None]
    y2 = (n2 - U[:, 2, None] - L[:, 2, 0, None] * y0 - L[:, 2, 1, None] * y1) \
        / L[:, 2, 2, None]
    expo = y0 * y0
    expo += y1 * y1
    expo += y2 * y2
    expo *= -0.5
    # prefactor kept outside the exponent so the identity case reproduces
    # the sampled Maxwellian bitwise in the exp argument
    pref = rho * np.exp(log_norm)
    return pref[:, None] * np.exp(expo)


def tilt_apply(g, psi, lam):
    """Multiply each row of g by exp(sum_a lam[c, a] * psi[a, :])."""
    return g * np.exp(lam @ psi)


def upwind_sweep(F, cou):
    """One first-order upwind advection step, periodic in the cell index.

    F: (C, N) with C spatial cells; cou: (N,) signed Courant numbers
    v1*dt/dx per velocity node, |cou| <= 1.
    """
    cp = np.maximum(cou, 0.0)
    cn = np.minimum(cou, 0.0)
    left = np.roll(F, 1, axis=0)
    right = np.roll(F, -1, axis=0)
    return F - cp * (F - left) - cn * (right - F)


def entropy_sums(w, F):
    """Per-cell sum(w * F * log F) over F > 0, and counts of F <= 0 nodes."""
    C = F.shape[0]
    sums = np.empty(C)
    counts = np.empty(C, dtype=np.int64)
    for c in range(C):
        pos = F[c] > 0.0
        counts[c] = F.shape[1] - int(pos.sum())
        v = F[c][pos]
        sums[c] = float(np.sum(w[pos] * v * np.log(v)))
    return sums, counts


def relax_combine(F, M, coef):
    """Implicit relaxation update (F + coef*M) / (1 + coef), per cell."""
    c = coef[:, None]
    return (F + c * M) / (1.0 + c)
