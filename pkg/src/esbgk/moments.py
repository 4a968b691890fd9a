"""Macroscopic fields: density, velocity, temperature and stress tensors.

The temperature tensor interpolates between the scalar temperature and the
stress tensor, T_nu = (1-nu) T Id + nu Theta, and must stay symmetric
positive definite for the relaxation parameter in (-1/2, 1).
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import (
    BoundViolationError,
    InvalidParameterError,
    NonPositiveDensityError,
    ValidityWarning,
)

NEGATIVE_ROUNDOFF_FLOOR = -1e-13
OFFDIAG = ((0, 1), (1, 2), (2, 0))  # R^6 packing order 11,22,33,12,23,31


def check_nu(nu):
    if not -0.5 < nu < 1.0:
        raise InvalidParameterError("nu", f"must lie in the open interval (-1/2, 1), got {nu}")
    return float(nu)


def sym6_to_matrix(x):
    """Unpack (11, 22, 33, 12, 23, 31) components into a symmetric 3x3."""
    m = np.empty((3, 3))
    m[0, 0], m[1, 1], m[2, 2] = x[0], x[1], x[2]
    m[0, 1] = m[1, 0] = x[3]
    m[1, 2] = m[2, 1] = x[4]
    m[2, 0] = m[0, 2] = x[5]
    return m


def matrix_to_sym6(m):
    return np.array([m[0, 0], m[1, 1], m[2, 2], m[0, 1], m[1, 2], m[2, 0]])


@dataclass
class MomentState:
    """Per-cell macroscopic state of a distribution function."""

    rho: float
    U: np.ndarray
    T: float
    Theta: np.ndarray
    Tnu: np.ndarray
    Gnu: np.ndarray
    nu: float


def g_tensor(rho, U, T, Theta, nu):
    """Conserved-variable tensor G: the second-moment block of (rho, rho U, G)."""
    usq = float(U @ U)
    G = (
        (1.0 - nu) / 3.0 * 0.5 * (3.0 * rho * T + rho * usq) * np.eye(3)
        + 0.5 * nu * (rho * Theta + rho * np.outer(U, U))
        - 0.5 * rho * np.eye(3)
    )
    return matrix_to_sym6(G)


def state_from_primitive(rho, U, Tnu, nu):
    """Assemble a MomentState from (rho, U, T_nu), deriving T, Theta, G.

    nu-smooth: Theta is recovered through nu*Theta = T_nu - (1-nu) T Id,
    so nu=0 forces Theta = T Id (the only self-consistent choice there).
    """
    nu = check_nu(nu)
    Tnu = np.asarray(Tnu, dtype=float)
    U = np.asarray(U, dtype=float)
    T = np.trace(Tnu) / 3.0
    if nu != 0.0:
        Theta = (Tnu - (1.0 - nu) * T * np.eye(3)) / nu
    else:
        Theta = T * np.eye(3)
    return MomentState(rho=float(rho), U=U, T=float(T), Theta=Theta, Tnu=Tnu,
                       Gnu=g_tensor(rho, U, T, Theta, nu), nu=nu)


def moments_raw_batch(F, grid):
    """Raw quadrature moments (C, 10) of per-cell fields against psi10."""
    f = np.atleast_2d(np.asarray(F, dtype=float))
    if f.shape[1] != grid.n_nodes:
        raise InvalidParameterError("F", f"expected {grid.n_nodes} velocity nodes")
    return _accel.kernels.moments_batch(grid.psi10, grid.weights, f)


def state_from_raw_moments(m, nu):
    """MomentState from one row of raw psi10 moments."""
    rho = m[0]
    if not rho > 0.0:
        raise NonPositiveDensityError(f"quadrature mass {rho} is not positive")
    U = m[1:4] / rho
    S = sym6_to_matrix(m[4:10])  # second moments about the origin
    Theta = S / rho - np.outer(U, U)
    T = np.trace(Theta) / 3.0
    Tnu = (1.0 - nu) * T * np.eye(3) + nu * Theta
    return MomentState(rho=float(rho), U=U, T=float(T), Theta=Theta, Tnu=Tnu,
                       Gnu=g_tensor(rho, U, T, Theta, nu), nu=nu)


def compute_moments(F, grid, nu):
    """Macroscopic moments of a single-cell distribution.

    F may carry small negative roundoff values; anything below -1e-13
    triggers a validity warning but moments are still computed. A
    non-positive quadrature mass is an error.
    """
    nu = check_nu(nu)
    f = np.asarray(F, dtype=float)
    fmin = f.min()
    if fmin < NEGATIVE_ROUNDOFF_FLOOR:
        warnings.warn(
            f"distribution has negative values down to {fmin:.3e}",
            ValidityWarning,
            stacklevel=2,
        )
    m = moments_raw_batch(f, grid)[0]
    return state_from_raw_moments(m, nu)


def compute_moments_batch(F, grid, nu):
    """MomentState per spatial cell for a (C, N) field array."""
    nu = check_nu(nu)
    m = moments_raw_batch(F, grid)
    return [state_from_raw_moments(row, nu) for row in m]


@dataclass
class SpdReport:
    """Result of the positive-definiteness and determinant cross-check."""

    is_spd: bool
    min_eigenvalue: float
    det_closed_form: float   # full symmetric cofactor expansion
    det_factorized: float    # product of LDL^T pivots
    det_paper_form: float    # expansion without the 2*T12*T23*T31 term
    pivots: np.ndarray = field(repr=False, default=None)


def det_closed_form_full(m):
    """det of a symmetric 3x3 via the full cofactor expansion."""
    return (
        m[0, 0] * m[1, 1] * m[2, 2]
        + 2.0 * m[0, 1] * m[1, 2] * m[2, 0]
        - m[1, 2] ** 2 * m[0, 0]
        - m[2, 0] ** 2 * m[1, 1]
        - m[0, 1] ** 2 * m[2, 2]
    )


def det_paper_form(m):
    """The printed closed form (no off-diagonal product term).

    Agrees with the full determinant whenever at least one off-diagonal
    entry vanishes; kept for documentation and cross-checking.
    """
    return (
        m[0, 0] * m[1, 1] * m[2, 2]
        - m[1, 2] ** 2 * m[0, 0]
        - m[2, 0] ** 2 * m[1, 1]
        - m[0, 1] ** 2 * m[2, 2]
    )


def ldl_pivots(m):
    """Pivots of the (unpivoted) LDL^T factorization of a symmetric 3x3."""
    d = np.empty(3)
    d[0] = m[0, 0]
    if d[0] == 0.0:
        return np.array([0.0, np.nan, np.nan])
    l10 = m[1, 0] / d[0]
    l20 = m[2, 0] / d[0]
    d[1] = m[1, 1] - l10 * l10 * d[0]
    if d[1] == 0.0:
        return np.array([d[0], 0.0, np.nan])
    l21 = (m[2, 1] - l20 * l10 * d[0]) / d[1]
    d[2] = m[2, 2] - l20 * l20 * d[0] - l21 * l21 * d[1]
    return d


def check_spd_and_det(Tnu, spd_tol=1e-12):
    """SPD verdict plus the determinant computed three independent ways."""
    m = np.asarray(Tnu, dtype=float)
    m = 0.5 * (m + m.T)  # defensive symmetrization
    pivots = ldl_pivots(m)
    is_spd = bool(np.all(np.nan_to_num(pivots, nan=-1.0) > spd_tol))
    det_fact = float(np.prod(pivots)) if not np.any(np.isnan(pivots)) else float("nan")
    min_eig = float(np.linalg.eigvalsh(m)[0])
    return SpdReport(
        is_spd=is_spd,
        min_eigenvalue=min_eig,
        det_closed_form=float(det_closed_form_full(m)),
        det_factorized=det_fact,
        det_paper_form=float(det_paper_form(m)),
        pivots=pivots,
    )


def equivalence_constants(nu):
    """(C1, C2) = (min, max) of {1 - nu, 1 + 2 nu}."""
    check_nu(nu)
    a, b = 1.0 - nu, 1.0 + 2.0 * nu
    return min(a, b), max(a, b)


@dataclass
class EquivalenceReport:
    c1: float
    c2: float
    T: float
    min_rayleigh: float
    max_rayleigh: float
    trials: int


def equivalence_bounds(state, trials=256, seed=0, slack=1e-10):
    """Check C1*T <= k^T T_nu k <= C2*T over random unit directions.

    Raises BoundViolationError (listing the offending direction) if any
    Rayleigh quotient escapes the slack-widened interval; that signals a
    bug or a state built from a signed distribution.
    """
    c1, c2 = equivalence_constants(state.nu)
    rng = np.random.default_rng(seed)
    k = rng.standard_normal((trials, 3))
    k /= np.linalg.norm(k, axis=1, keepdims=True)
    rq = np.einsum("ti,ij,tj->t", k, state.Tnu, k)
    lo, hi = c1 * state.T - slack, c2 * state.T + slack
    bad = np.where((rq < lo) | (rq > hi))[0]
    if bad.size:
        i = bad[0]
        raise BoundViolationError(
            f"Rayleigh quotient {rq[i]:.15e} outside [{lo:.15e}, {hi:.15e}] "
            f"for direction {k[i]}",
            direction=k[i],
        )
    return EquivalenceReport(
        c1=c1, c2=c2, T=state.T,
        min_rayleigh=float(rq.min()), max_rayleigh=float(rq.max()),
        trials=trials,
    )


def moment_state_csv_header():
    cols = ["rho", "U1", "U2", "U3", "T"]
    cols += [f"Theta{i}{j}" for i, j in ((1, 1), (2, 2), (3, 3), (1, 2), (2, 3), (3, 1))]
    cols += [f"Tnu{i}{j}" for i, j in ((1, 1), (2, 2), (3, 3), (1, 2), (2, 3), (3, 1))]
    return ",".join(cols)


def moment_state_csv_row(state):
    """One CSV row per spatial cell: rho, U, T, Theta (6), T_nu (6)."""
    vals = [state.rho, *state.U, state.T]
    vals += list(matrix_to_sym6(state.Theta))
    vals += list(matrix_to_sym6(state.Tnu))
    return ",".join(f"{v:.17g}" for v in vals)
