"""The anisotropic Gaussian attractor and its conservative correction.

The relaxation target is a Gaussian with covariance T_nu. On a truncated
grid its quadrature moments miss the analytic ones by the quadrature error;
the conservative correction removes that mismatch exactly by tilting the
Gaussian inside its own exponential family.
"""
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import NoConvergenceError, NotSpdError
from .moments import check_spd_and_det

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GaussianSpec:
    """Precomputed pieces of one anisotropic Gaussian."""

    rho: float
    U: np.ndarray
    Tnu: np.ndarray
    inverse: np.ndarray
    log_norm: float
    chol: np.ndarray


def gaussian_spec(rho, U, Tnu, spd_tol=1e-12):
    """Factorize T_nu and assemble the normalization constants.

    Raises NotSpdError when T_nu is not positive definite at spd_tol.
    """
    Tnu = np.asarray(Tnu, dtype=float)
    Tnu = 0.5 * (Tnu + Tnu.T)
    report = check_spd_and_det(Tnu, spd_tol=spd_tol)
    if not report.is_spd:
        raise NotSpdError(
            f"temperature tensor is not SPD (min eigenvalue {report.min_eigenvalue:.3e})"
        )
    chol = np.linalg.cholesky(Tnu)
    log_norm = -1.5 * LOG_2PI - float(np.sum(np.log(np.diag(chol))))
    inverse = np.linalg.solve(Tnu, np.eye(3))
    return GaussianSpec(
        rho=float(rho), U=np.asarray(U, dtype=float), Tnu=Tnu,
        inverse=inverse, log_norm=log_norm, chol=chol,
    )


def sample_gaussian(spec, grid):
    """Sample one Gaussian at every velocity node (exponent via Cholesky solve)."""
    out = _accel.kernels.gaussian_eval(
        grid.nodes,
        np.array([spec.rho]),
        spec.U[None, :],
        spec.chol[None, :, :],
        np.array([spec.log_norm]),
    )
    return out[0]


def gaussian_from_params(rho, U, Tnu, grid, spd_tol=1e-12):
    """Sampled Gaussian from explicit (rho, U, T_nu)."""
    return sample_gaussian(gaussian_spec(rho, U, Tnu, spd_tol=spd_tol), grid)


def build_gaussian(state, grid, spd_tol=1e-12):
    """Sampled anisotropic Gaussian of a MomentState.

    All values are strictly positive; quadrature moments agree with
    (rho, rho U, rho T_nu + rho U x U) up to the grid's quadrature error.
    """
    return gaussian_from_params(state.rho, state.U, state.Tnu, grid, spd_tol=spd_tol)


def build_gaussian_batch(rho, U, Tnu, grid, spd_tol=1e-12):
    """Vectorized Gaussian sampling for C cells; returns (values, chol, log_norm)."""
    rho = np.asarray(rho, dtype=float)
    U = np.asarray(U, dtype=float)
    Tnu = np.asarray(Tnu, dtype=float)
    try:
        chol = np.linalg.cholesky(Tnu)
    except np.linalg.LinAlgError:
        bad = [c for c in range(Tnu.shape[0])
               if not check_spd_and_det(Tnu[c], spd_tol=spd_tol).is_spd]
        raise NotSpdError(f"temperature tensor not SPD in cells {bad}") from None
    diag = np.einsum("cii->ci", chol)
    if np.any(diag * diag <= spd_tol):
        bad = np.where(np.any(diag * diag <= spd_tol, axis=1))[0]
        raise NotSpdError(f"temperature tensor near-singular in cells {bad.tolist()}")
    log_norm = -1.5 * LOG_2PI - np.sum(np.log(diag), axis=1)
    values = _accel.kernels.gaussian_eval(grid.nodes, rho, U, chol, log_norm)
    return values, chol, log_norm


def conservation_targets(state):
    """Discrete moment targets (rho, rho U, rho T_nu + rho U x U) as a 10-vector."""
    rho, U, Tnu = state.rho, state.U, state.Tnu
    S = rho * Tnu + rho * np.outer(U, U)
    return np.array([
        rho, rho * U[0], rho * U[1], rho * U[2],
        S[0, 0], S[1, 1], S[2, 2], S[0, 1], S[1, 2], S[2, 0],
    ])


@dataclass
class CorrectionResult:
    values: np.ndarray
    iterations: np.ndarray
    residual: np.ndarray  # worst relative residual per cell after the solve


def conservative_correction_batch(raw, targets, grid, tol=1e-14, max_newton=25):
    """Damped Newton moment matching inside the exponential-tilt family.

    Finds lambda (10 per cell) such that the discrete psi10 moments of
    raw * exp(lambda . psi) equal the targets to a relative tolerance. The
    Jacobian is the weighted Gram matrix of psi10 (symmetric positive
    definite for positive fields), so the damped iteration is a convex
    optimization in disguise and converges from the zero start whenever the
    targets are reachable on the grid.
    """
    kern = _accel.kernels
    psi, w = grid.psi10, grid.weights
    g = np.array(raw, dtype=float)
    if g.ndim != 2:
        raise ValueError("raw must be (cells, nodes)")
    C = g.shape[0]
    t = np.asarray(targets, dtype=float)
    # relative scale per cell: density and the largest second moment
    scale = np.maximum(t[:, 0], np.abs(t[:, 4:7]).sum(axis=1))
    scale = np.maximum(scale, 1e-300)
    lam = np.zeros((C, 10))
    iterations = np.zeros(C, dtype=int)
    resid = np.abs(t - kern.moments_batch(psi, w, g)) / scale[:, None]
    worst = resid.max(axis=1)
    for _ in range(max_newton):
        active = np.where(worst > tol)[0]
        if active.size == 0:
            break
        ga = g[active]
        r = t[active] - kern.moments_batch(psi, w, ga)
        J = kern.weighted_gram(psi, w, ga)
        try:
            delta = np.linalg.solve(J, r[..., None])[..., 0]
        except np.linalg.LinAlgError:
            raise NoConvergenceError(
                "singular moment Jacobian (state unreachable on this grid)",
                residual=worst.max(),
            ) from None
        rnorm_old = np.linalg.norm(r / scale[active, None], axis=1)
        step = np.ones(active.size)
        g_new = np.empty_like(ga)
        with np.errstate(over="ignore", invalid="ignore"):
            for _halving in range(60):
                g_new = kern.tilt_apply(ga, psi, step[:, None] * delta)
                r_new = t[active] - kern.moments_batch(psi, w, g_new)
                rnorm_new = np.linalg.norm(r_new / scale[active, None], axis=1)
                need_damp = ~(rnorm_new <= rnorm_old)  # NaN/inf counts as worse
                if not np.any(need_damp):
                    break
                step[need_damp] *= 0.5
        g[active] = g_new
        lam[active] += step[:, None] * delta
        iterations[active] += 1
        # r_new already holds the residual of the accepted g_new
        worst[active] = (np.abs(r_new) / scale[active, None]).max(axis=1)
    if np.any(worst > tol):
        bad = int(np.argmax(worst))
        raise NoConvergenceError(
            f"moment matching stalled in cell {bad}: relative residual "
            f"{worst[bad]:.3e} after {max_newton} Newton steps "
            "(state too anisotropic for the velocity grid)",
            residual=float(worst[bad]),
        )
    return CorrectionResult(values=g, iterations=iterations, residual=worst)


def conservative_correction(raw_gaussian, target, grid, tol=1e-14, max_newton=25):
    """Tilt one raw Gaussian so its discrete moments match the target state.

    Returns the corrected per-node values (still strictly positive). The
    zero-residual case returns the input unchanged.
    """
    raw = np.asarray(raw_gaussian, dtype=float)
    res = conservative_correction_batch(
        raw[None, :], conservation_targets(target)[None, :], grid,
        tol=tol, max_newton=max_newton,
    )
    if res.iterations[0] == 0:
        return raw.copy()
    return res.values[0]
