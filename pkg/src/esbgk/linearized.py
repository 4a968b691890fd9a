"""Linearization around the global Maxwellian.

Implements the perturbation change of variables F = mu + sqrt(mu) f, the
orthogonal projections P0/P1/P2 and the linearized relaxation operator
L_nu f = (P0 f + nu (P1 + P2) f - f) / (1 - nu), together with the
finite-difference verifications of the closed-form derivative identities.
"""
import warnings
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import DegenerateBasisError, InvalidParameterError, ValidityWarning
from .gaussian import build_gaussian, gaussian_from_params
from .moments import check_nu, compute_moments


@dataclass
class PerturbationField:
    """f = (F - mu)/sqrt(mu) on the grid; may be (N,) or (cells, N)."""

    values: np.ndarray
    grid: object


def to_perturbation(F, grid):
    f = (np.asarray(F, dtype=float) - grid.mu) / grid.sqrt_mu
    return PerturbationField(values=f, grid=grid)


def from_perturbation(pf):
    return pf.grid.mu + pf.grid.sqrt_mu * pf.values


def _project(f, basis, span):
    values = np.asarray(f, dtype=float)
    f2 = np.atleast_2d(values)
    sub = basis.ortho_functions[list(span)]
    coeff = _accel.kernels.moments_batch(sub, basis.grid.weights, f2)
    out = coeff @ sub
    return out[0] if values.ndim == 1 else out


def project_P0(f, basis):
    """Orthogonal projection onto the 5-dim collision-invariant span."""
    return _project(f, basis, basis.invariant_span)


def project_P1(f, basis):
    """Orthogonal projection onto the trace-free diagonal (2-dim) span."""
    return _project(f, basis, basis.p1_span)


def project_P2(f, basis):
    """Orthogonal projection onto the off-diagonal (3-dim) span."""
    return _project(f, basis, basis.p2_span)


def apply_Lnu(f, nu, basis):
    """L_nu f = (P0 f + nu P1 f + nu P2 f - f) / (1 - nu)."""
    nu = check_nu(nu)
    f = np.asarray(f, dtype=float)
    p0 = project_P0(f, basis)
    p12 = project_P1(f, basis) + project_P2(f, basis)
    return (p0 + nu * p12 - f) / (1.0 - nu)


def coercivity_constant(nu):
    """min{1, (1 - |nu|)/(1 - nu)}; the spectral-gap constant."""
    check_nu(nu)
    return min(1.0, (1.0 - abs(nu)) / (1.0 - nu))


def coercivity_gap(f, nu, basis):
    """(lhs, rhs) of the dissipation inequality <L_nu f, f> <= -C ||(I-P0)f||^2."""
    nu = check_nu(nu)
    f = np.asarray(f, dtype=float)
    w = basis.grid.weights
    lf = apply_Lnu(f, nu, basis)
    lhs = float(np.sum(w * lf * f))
    micro = f - project_P0(f, basis)
    rhs = -coercivity_constant(nu) * float(np.sum(w * micro * micro))
    return lhs, rhs


@dataclass
class MacroCoefficients:
    """Raw moment functionals a = <f, sqrt_mu>, b_i = <f, v_i sqrt_mu>,
    c = <f, |v|^2 sqrt_mu>."""

    a: float
    b: np.ndarray
    c: float


def _phi5(grid):
    # cached raw span {sqrt_mu, v_i sqrt_mu, |v|^2 sqrt_mu} and its Gram inverse
    cached = getattr(grid, "_phi5_cache", None)
    if cached is not None:
        return cached
    v1, v2, v3 = grid.nodes.T
    s = grid.sqrt_mu
    phi = np.stack([s, v1 * s, v2 * s, v3 * s, grid.v_sq * s])
    gram = (phi * grid.weights) @ phi.T
    try:
        gram_inv = np.linalg.inv(gram)
    except np.linalg.LinAlgError:
        raise DegenerateBasisError("macroscopic Gram matrix is singular") from None
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise DegenerateBasisError(f"macroscopic Gram matrix ill-conditioned ({cond:.3e})")
    grid._phi5_cache = (phi, gram_inv)
    return grid._phi5_cache


def macro_coefficients(f, grid):
    """The (a, b, c) quadratures of one perturbation field."""
    phi, _ = _phi5(grid)
    m = _accel.kernels.moments_batch(phi, grid.weights, np.atleast_2d(np.asarray(f, float)))[0]
    return MacroCoefficients(a=float(m[0]), b=m[1:4].copy(), c=float(m[4]))


def macro_projection(f, grid):
    """Field in span{sqrt_mu, v_i sqrt_mu, |v|^2 sqrt_mu} matching the (a, b, c)
    quadratures of f (5x5 discrete Gram solve)."""
    phi, gram_inv = _phi5(grid)
    values = np.asarray(f, dtype=float)
    f2 = np.atleast_2d(values)
    m = _accel.kernels.moments_batch(phi, grid.weights, f2)
    out = (m @ gram_inv.T) @ phi
    return out[0] if values.ndim == 1 else out


def reconstruct_macro(coeffs, grid):
    """Field with the given raw (a, b, c) functionals, in the invariant span."""
    phi, gram_inv = _phi5(grid)
    m = np.concatenate([[coeffs.a], coeffs.b, [coeffs.c]])
    return (gram_inv @ m) @ phi


def micro_macro_residual(f_t, f, nu, basis, dx, conservative=False):
    """Project the discrete equation residual onto the 13-moment basis.

    f and f_t are (cells, N) arrays on a periodic 1D-in-x mesh with spacing
    dx. The residual combines the macroscopic transport of Pf with the
    microscopic balance -(d_t + v d_x)(I-P)f + L_nu (I-P)f plus the
    nonlinear remainder of the full discrete relaxation operator; its 13
    projection coefficients vanish to discretization order when f solves
    the discrete equation.
    """
    nu = check_nu(nu)
    f = np.asarray(f, dtype=float)
    f_t = np.asarray(f_t, dtype=float)
    if f.ndim != 2 or f_t.shape != f.shape:
        raise InvalidParameterError("f_t", "f and f_t must be matching (cells, nodes) arrays")
    grid = basis.grid
    if f.shape[1] != grid.n_nodes:
        raise InvalidParameterError("f", f"expected {grid.n_nodes} velocity nodes")
    v1 = grid.nodes[:, 0]

    def transport(g):
        return v1 * (np.roll(g, -1, axis=0) - np.roll(g, 1, axis=0)) / (2.0 * dx)

    pf = macro_projection(f, grid)
    pft = macro_projection(f_t, grid)
    micro = f - pf
    micro_t = f_t - pft
    lhs = pft + transport(pf)

    l_micro = apply_Lnu(micro, nu, basis)
    # nonlinear remainder: full discrete relaxation RHS minus its linear part
    from .solver import relaxation_rhs_batch  # local import avoids a cycle

    rhs_full = relaxation_rhs_batch(f, grid, nu, conservative=conservative)
    gamma = rhs_full - apply_Lnu(f, nu, basis)
    rhs = -(micro_t + transport(micro)) + l_micro + gamma
    return basis.coefficients(lhs - rhs)


# --- finite-difference verifications of the closed-form identities ---


def conserved_from_primitive(rho, U, Tnu, nu):
    """The map (rho, U, T_nu) -> (rho, rho U, G) as a 10-vector.

    Written in a nu-smooth form (nu Theta is eliminated through
    T_nu - (1-nu) T Id), valid on the whole range -1/2 < nu < 1.
    """
    U = np.asarray(U, dtype=float)
    Tnu = np.asarray(Tnu, dtype=float)
    T = np.trace(Tnu) / 3.0
    usq = float(U @ U)
    G = (
        (1.0 - nu) / 3.0 * 0.5 * (3.0 * rho * T + rho * usq) * np.eye(3)
        + 0.5 * rho * (Tnu - (1.0 - nu) * T * np.eye(3))
        + 0.5 * nu * rho * np.outer(U, U)
        - 0.5 * rho * np.eye(3)
    )
    return np.array([
        rho, rho * U[0], rho * U[1], rho * U[2],
        G[0, 0], G[1, 1], G[2, 2], G[0, 1], G[1, 2], G[2, 0],
    ])


def _primitive_pack(rho, U, T6):
    return np.concatenate([[rho], U, T6])


def _primitive_unpack(p):
    rho = p[0]
    U = p[1:4]
    T6 = p[4:10]
    Tnu = np.array([
        [T6[0], T6[3], T6[5]],
        [T6[3], T6[1], T6[4]],
        [T6[5], T6[4], T6[2]],
    ])
    return rho, U, Tnu


def equilibrium_jacobian_target():
    """I(4, 6; 1, 1/2): four unit then six one-half diagonal entries."""
    return np.diag(np.array([1.0] * 4 + [0.5] * 6))


def verify_jacobian_at_equilibrium(nu, h=1e-4):
    """Central-difference Jacobian of (rho, U, T_nu) -> (rho, rho U, G) at
    (1, 0, Id), compared entry-wise with I(4, 6; 1, 1/2).

    Returns (jacobian, max_deviation); deviation <= 10 h^2 by the operation
    contract (the map is polynomial of low degree, so central differences
    are nearly exact).
    """
    if not 0.0 < h <= 1e-3:
        raise InvalidParameterError("h", "step must lie in (0, 1e-3]")
    check_nu(nu)
    p0 = _primitive_pack(1.0, np.zeros(3), np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]))
    J = np.empty((10, 10))
    for a in range(10):
        pp = p0.copy()
        pm = p0.copy()
        pp[a] += h
        pm[a] -= h
        fp = conserved_from_primitive(*_primitive_unpack(pp), nu)
        fm = conserved_from_primitive(*_primitive_unpack(pm), nu)
        J[:, a] = (fp - fm) / (2.0 * h)
    dev = float(np.abs(J - equilibrium_jacobian_target()).max())
    return J, dev


GAUSSIAN_DERIVATIVE_PARAMS = (
    "rho", "U1", "U2", "U3", "T11", "T22", "T33", "T12", "T23", "T31",
)


def gaussian_derivative_closed_form(grid, param):
    """Closed-form derivative of the Gaussian at equilibrium for one parameter."""
    v = grid.nodes
    mu = grid.mu
    if param == "rho":
        return mu.copy()
    if param.startswith("U"):
        i = int(param[1]) - 1
        return v[:, i] * mu
    i, j = int(param[1]) - 1, int(param[2]) - 1
    if i == j:
        return 0.5 * (v[:, i] ** 2 - 1.0) * mu
    return v[:, i] * v[:, j] * mu


def verify_gaussian_derivatives_at_mu(grid, h=1e-4):
    """Node-wise central differences of the sampled Gaussian in each of the
    ten parameters at (rho, U, T_nu) = (1, 0, Id), against the closed forms.

    Returns a dict of max absolute node-wise errors keyed by parameter.
    """
    if not 0.0 < h <= 1e-3:
        raise InvalidParameterError("h", "step must lie in (0, 1e-3]")
    p0 = _primitive_pack(1.0, np.zeros(3), np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]))
    errors = {}
    for a, name in enumerate(GAUSSIAN_DERIVATIVE_PARAMS):
        pp = p0.copy()
        pm = p0.copy()
        pp[a] += h
        pm[a] -= h
        gp = gaussian_from_params(*_primitive_unpack(pp), grid)
        gm = gaussian_from_params(*_primitive_unpack(pm), grid)
        fd = (gp - gm) / (2.0 * h)
        errors[name] = float(np.abs(fd - gaussian_derivative_closed_form(grid, name)).max())
    return errors


def apply_Pnu(f, nu, basis):
    """P_nu f = P0 f + nu (P1 f + P2 f)."""
    return project_P0(f, basis) + nu * (project_P1(f, basis) + project_P2(f, basis))


def verify_first_variation(f, nu, eps_list, basis):
    """Quadratic-remainder check of the Gaussian expansion around mu.

    For each eps, builds F = mu + eps sqrt_mu f, forms the discrete Gaussian
    of its moments and measures
    r(eps) = || (M_nu(F) - mu)/sqrt_mu - eps P_nu f ||_{L2_v}.
    Returns (r_values, ratios) where ratios[i] = r(eps[i+1]) / r(eps[i]);
    for eps halving the ratios approach 1/4.
    """
    nu = check_nu(nu)
    grid = basis.grid
    f = np.asarray(f, dtype=float)
    pnu = apply_Pnu(f, nu, basis)
    w = grid.weights
    rs = []
    for eps in eps_list:
        if eps == 0.0:
            rs.append(0.0)
            continue
        F = grid.mu + eps * grid.sqrt_mu * f
        # F may be pointwise signed in the far tail; the expansion only needs
        # positive density and an SPD tensor, so the negativity warning is
        # expected noise here
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            state = compute_moments(F, grid, nu)
        M = build_gaussian(state, grid)
        rem = (M - grid.mu) / grid.sqrt_mu - eps * pnu
        rs.append(float(np.sqrt(np.sum(w * rem * rem))))
    rs = np.array(rs)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = rs[1:] / rs[:-1]
    return rs, ratios


def make_random_fields(grid, basis, n, seed, normalize=True):
    """Seeded random perturbation fields: combinations of the 13 basis
    functions plus Gaussian-weighted monomials up to degree 4."""
    rng = np.random.default_rng(seed)
    v1, v2, v3 = grid.nodes.T
    s = grid.sqrt_mu
    extras = np.stack([
        v1 * v1 * v2 * s, v2 * v2 * v3 * s, v1 * v2 * v3 * s,
        v1 ** 4 * s, v2 ** 2 * v3 ** 2 * s, grid.v_sq * grid.v_sq * s,
    ])
    coeff13 = rng.standard_normal((n, 13))
    coeff_extra = 0.25 * rng.standard_normal((n, extras.shape[0]))
    fields = coeff13 @ basis.ortho_functions + coeff_extra @ extras
    if normalize:
        norms = np.sqrt(np.sum(grid.weights * fields * fields, axis=1))
        fields /= norms[:, None]
    return fields
