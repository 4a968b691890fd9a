"""Time integration on a periodic 1D-in-x, 3D-in-v phase space.

Transport/relaxation Strang splitting. The relaxation half is implicit in F
and explicit in the Gaussian attractor, so each update is a convex
combination of F and M_nu: unconditionally stable and positivity
preserving. Transport is first-order upwind under a CFL bound.
"""
import json
import os
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import (
    CflViolationError,
    InvalidParameterError,
    NoConvergenceError,
    NonPositiveDensityError,
    NotSpdError,
)
from .gaussian import build_gaussian_batch, conservative_correction_batch, gaussian_from_params
from .grid import VelocityGrid
from .moments import check_nu, moments_raw_batch

TWO_PI = 2.0 * np.pi


@dataclass
class SpatialGrid:
    """Periodic 1D torus, uniform cells; index arithmetic is exact mod n_x."""

    n_x: int
    length: float = TWO_PI

    def __post_init__(self):
        if self.n_x < 1:
            raise InvalidParameterError("n_x", "need at least one spatial cell")
        if not self.length > 0:
            raise InvalidParameterError("length", "must be positive")
        self.dx = self.length / self.n_x
        self.x = (np.arange(self.n_x) + 0.5) * self.dx


@dataclass
class DistributionField:
    """F on (spatial cell, velocity node), with its grids."""

    values: np.ndarray
    vgrid: VelocityGrid
    sgrid: SpatialGrid

    def copy(self):
        return DistributionField(self.values.copy(), self.vgrid, self.sgrid)


@dataclass
class SolverConfig:
    """Time-stepping parameters; grid objects travel with the field."""

    nu: float
    dt: float
    t_end: float
    cfl: float = 0.9
    conservative_mode: bool = True
    transport_scheme: str = "upwind1"
    output_every: int = 10
    newton_tol: float = 1e-14
    max_newton: int = 25

    def __post_init__(self):
        check_nu(self.nu)
        if self.transport_scheme not in ("upwind1", "none"):
            raise InvalidParameterError("transport_scheme", "must be 'upwind1' or 'none'")
        if not self.dt > 0:
            raise InvalidParameterError("dt", "must be positive")
        if self.t_end < 0:
            raise InvalidParameterError("t_end", "must be non-negative")
        if not 0 < self.cfl <= 1:
            raise InvalidParameterError("cfl", "must lie in (0, 1]")
        if self.output_every < 1:
            raise InvalidParameterError("output_every", "must be >= 1")


def macro_fields_batch(F, grid, nu):
    """Vectorized macroscopic fields for all cells.

    Returns a dict of arrays: raw moments m (C, 10), rho, U, T, Tnu
    (C, 3, 3), collision frequency A = rho T/(1 - nu).
    """
    m = moments_raw_batch(F, grid)
    rho = np.ascontiguousarray(m[:, 0])
    if np.any(rho <= 0.0):
        bad = np.where(rho <= 0.0)[0]
        raise NonPositiveDensityError(f"non-positive quadrature mass in cells {bad.tolist()}")
    U = m[:, 1:4] / rho[:, None]
    theta6 = np.empty((m.shape[0], 6))
    theta6[:, 0] = m[:, 4] / rho - U[:, 0] * U[:, 0]
    theta6[:, 1] = m[:, 5] / rho - U[:, 1] * U[:, 1]
    theta6[:, 2] = m[:, 6] / rho - U[:, 2] * U[:, 2]
    theta6[:, 3] = m[:, 7] / rho - U[:, 0] * U[:, 1]
    theta6[:, 4] = m[:, 8] / rho - U[:, 1] * U[:, 2]
    theta6[:, 5] = m[:, 9] / rho - U[:, 2] * U[:, 0]
    T = (theta6[:, 0] + theta6[:, 1] + theta6[:, 2]) / 3.0
    tnu6 = nu * theta6
    tnu6[:, 0:3] += ((1.0 - nu) * T)[:, None]
    C = m.shape[0]
    Tnu = np.empty((C, 3, 3))
    Tnu[:, 0, 0] = tnu6[:, 0]
    Tnu[:, 1, 1] = tnu6[:, 1]
    Tnu[:, 2, 2] = tnu6[:, 2]
    Tnu[:, 0, 1] = Tnu[:, 1, 0] = tnu6[:, 3]
    Tnu[:, 1, 2] = Tnu[:, 2, 1] = tnu6[:, 4]
    Tnu[:, 2, 0] = Tnu[:, 0, 2] = tnu6[:, 5]
    return {
        "m": m, "rho": rho, "U": U, "T": T, "tnu6": tnu6, "Tnu": Tnu,
        "A": rho * T / (1.0 - nu),
    }


def relaxation_attractor_batch(F, grid, nu, conservative, newton_tol=1e-14, max_newton=25):
    """Per-cell Gaussian attractor M_nu(F) and collision frequency A."""
    mac = macro_fields_batch(F, grid, nu)
    M, _, _ = build_gaussian_batch(mac["rho"], mac["U"], mac["Tnu"], grid)
    if conservative:
        rho, U, tnu6 = mac["rho"], mac["U"], mac["tnu6"]
        targets = np.empty((F.shape[0], 10))
        targets[:, 0] = rho
        targets[:, 1:4] = mac["m"][:, 1:4]  # rho U, exactly as measured
        targets[:, 4] = rho * (tnu6[:, 0] + U[:, 0] * U[:, 0])
        targets[:, 5] = rho * (tnu6[:, 1] + U[:, 1] * U[:, 1])
        targets[:, 6] = rho * (tnu6[:, 2] + U[:, 2] * U[:, 2])
        targets[:, 7] = rho * (tnu6[:, 3] + U[:, 0] * U[:, 1])
        targets[:, 8] = rho * (tnu6[:, 4] + U[:, 1] * U[:, 2])
        targets[:, 9] = rho * (tnu6[:, 5] + U[:, 2] * U[:, 0])
        M = conservative_correction_batch(
            M, targets, grid, tol=newton_tol, max_newton=max_newton
        ).values
    return M, mac


def relaxation_rhs_batch(f, grid, nu, conservative=False):
    """Discrete relaxation right-hand side in perturbation variables.

    Returns A_nu (M_nu(F) - F)/sqrt(mu) for F = mu + sqrt(mu) f; used by the
    micro-macro residual diagnostic.
    """
    f = np.atleast_2d(np.asarray(f, dtype=float))
    F = grid.mu + grid.sqrt_mu * f
    M, mac = relaxation_attractor_batch(F, grid, nu, conservative)
    return mac["A"][:, None] * (M - F) / grid.sqrt_mu


def relaxation_step(field, dt, nu, conservative_mode=True, newton_tol=1e-14, max_newton=25):
    """Implicit-in-F relaxation update F <- (F + dt A M_nu)/(1 + dt A).

    The update is a convex combination of F and M_nu, hence non-negative
    for non-negative data and unconditionally stable in dt.
    """
    nu = check_nu(nu)
    if dt < 0:
        raise InvalidParameterError("dt", "must be non-negative")
    F = field.values
    M, mac = relaxation_attractor_batch(
        F, field.vgrid, nu, conservative_mode, newton_tol=newton_tol, max_newton=max_newton
    )
    new = _accel.kernels.relax_combine(F, M, dt * mac["A"])
    return DistributionField(new, field.vgrid, field.sgrid)


def transport_step(field, dt, cfl=1.0):
    """First-order upwind advection in x, periodic wrap, per velocity node."""
    if dt < 0:
        raise InvalidParameterError("dt", "must be non-negative")
    sgrid = field.sgrid
    v1 = field.vgrid.nodes[:, 0]
    cou = v1 * (dt / sgrid.dx)
    cmax = float(np.abs(cou).max())
    if cmax > cfl * (1.0 + 1e-12):
        raise CflViolationError(
            f"Courant number {cmax:.6g} exceeds the bound {cfl} "
            f"(dt={dt}, dx={sgrid.dx:.6g}, v_max_axis={np.abs(v1).max():.6g})"
        )
    new = _accel.kernels.upwind_sweep(field.values, cou)
    return DistributionField(new, field.vgrid, field.sgrid)


def is_homogeneous(field, config):
    return config.transport_scheme == "none" or field.sgrid.n_x == 1


def strang_step(field, dt, config):
    """transport(dt/2) o relaxation(dt) o transport(dt/2); homogeneous mode
    skips the transport halves."""
    if dt == 0.0:
        return field.copy()
    if not is_homogeneous(field, config):
        field = transport_step(field, 0.5 * dt, cfl=config.cfl)
    field = relaxation_step(
        field, dt, config.nu, config.conservative_mode,
        newton_tol=config.newton_tol, max_newton=config.max_newton,
    )
    if not is_homogeneous(field, config):
        field = transport_step(field, 0.5 * dt, cfl=config.cfl)
    return field


def check_cfl(config, field):
    if is_homogeneous(field, config):
        return
    bound = config.cfl * field.sgrid.dx / field.vgrid.v_max
    if config.dt > bound * (1.0 + 1e-12):
        raise CflViolationError(
            f"dt={config.dt} exceeds cfl*dx/v_max={bound:.6g}"
        )


def _diagnostics_record(field, nu):
    from .diagnostics import entropy  # deferred: diagnostics imports solver lazily

    F = field.values
    vgrid, sgrid = field.vgrid, field.sgrid
    dx = sgrid.dx
    m = moments_raw_batch(F, vgrid)
    mass = dx * float(m[:, 0].sum())
    momentum = dx * m[:, 1:4].sum(axis=0)
    energy = dx * float(m[:, 4:7].sum())
    ent, flags = entropy(F, vgrid, dx)
    fpert = (F - vgrid.mu) / vgrid.sqrt_mu
    pert = float(np.sqrt(dx * np.sum(vgrid.weights * fpert * fpert)))
    mac = macro_fields_batch(F, vgrid, nu)
    eigs = np.linalg.eigvalsh(mac["Tnu"])
    return {
        "mass": mass, "momentum": momentum, "energy": energy,
        "entropy": ent, "entropy_flags": int(flags),
        "perturbation_l2": pert, "min_F": float(F.min()),
        "spd_margin": float(eigs[:, 0].min()),
    }


def run_simulation(F0, config, on_output=None):
    """Advance F0 to t_end, recording diagnostics at the output cadence.

    on_output, when given, is called as on_output(step, t, field) at every
    recorded time (including t=0 and the final step). Deterministic for
    fixed inputs. On a not-SPD or no-convergence abort the raised error
    carries the failing field and time for a state dump.
    """
    check_cfl(config, F0)
    n_steps = int(round(config.t_end / config.dt))
    if abs(n_steps * config.dt - config.t_end) > 1e-9 * max(1.0, config.t_end):
        raise InvalidParameterError("t_end", "must be an integer multiple of dt")
    field = F0.copy()
    rows = []
    times = []

    def record(step):
        times.append(step * config.dt)
        rows.append(_diagnostics_record(field, config.nu))
        if on_output is not None:
            on_output(step, step * config.dt, field)

    record(0)
    try:
        for step in range(1, n_steps + 1):
            field = strang_step(field, config.dt, config)
            if step % config.output_every == 0 or step == n_steps:
                record(step)
    except (NotSpdError, NoConvergenceError) as err:
        err.field_at_failure = field
        err.t_at_failure = times[-1] if times else 0.0
        raise
    from .diagnostics import DiagnosticsSeries

    series = DiagnosticsSeries(
        times=np.array(times),
        mass=np.array([r["mass"] for r in rows]),
        momentum=np.array([r["momentum"] for r in rows]),
        energy=np.array([r["energy"] for r in rows]),
        entropy=np.array([r["entropy"] for r in rows]),
        entropy_flags=np.array([r["entropy_flags"] for r in rows], dtype=int),
        perturbation_l2=np.array([r["perturbation_l2"] for r in rows]),
        min_F=np.array([r["min_F"] for r in rows]),
        spd_margin=np.array([r["spd_margin"] for r in rows]),
    )
    return field, series


# --- initial conditions ---


def maxwellian_field(vgrid, sgrid):
    """Global equilibrium, uniform in x."""
    F = np.tile(vgrid.mu, (sgrid.n_x, 1))
    return DistributionField(F, vgrid, sgrid)


def cosine_density_field(vgrid, sgrid, amplitude):
    """F0 = (1 + a cos(2 pi x / L)) mu(v); requires |a| < 1 for positivity."""
    if not abs(amplitude) < 1.0:
        raise InvalidParameterError("amplitude", "|amplitude| must be < 1 to keep F0 > 0")
    mod = 1.0 + amplitude * np.cos(TWO_PI * sgrid.x / sgrid.length)
    F = mod[:, None] * vgrid.mu[None, :]
    return DistributionField(F, vgrid, sgrid)


def anisotropic_gaussian_field(vgrid, sgrid, theta_diag, theta_offdiag=(0.0, 0.0, 0.0)):
    """Homogeneous Gaussian with unit density, zero velocity, stress Theta."""
    d = np.asarray(theta_diag, dtype=float)
    o = np.asarray(theta_offdiag, dtype=float)
    Theta = np.array([
        [d[0], o[0], o[2]],
        [o[0], d[1], o[1]],
        [o[2], o[1], d[2]],
    ])
    g = gaussian_from_params(1.0, np.zeros(3), Theta, vgrid)
    F = np.tile(g, (sgrid.n_x, 1))
    return DistributionField(F, vgrid, sgrid)


def initial_field(vgrid, sgrid, ic, ic_params=None):
    """Dispatch an initial-condition spec to its builder."""
    p = dict(ic_params or {})
    if ic == "maxwellian":
        return maxwellian_field(vgrid, sgrid)
    if ic == "cosine_density":
        return cosine_density_field(vgrid, sgrid, float(p.get("amplitude", 0.01)))
    if ic == "anisotropic_gaussian":
        return anisotropic_gaussian_field(
            vgrid, sgrid,
            p.get("theta_diag", (1.0, 1.0, 1.0)),
            p.get("theta_offdiag", (0.0, 0.0, 0.0)),
        )
    if ic == "snapshot":
        field, _ = load_snapshot(p["path"])
        return field
    raise InvalidParameterError("ic", f"unknown initial condition {ic!r}")


# --- snapshot format: raw little-endian float64, x-major, + JSON sidecar ---


def snapshot_sidecar_path(path):
    return os.path.splitext(path)[0] + ".json"


def save_snapshot(path, field, t=0.0, nu=None, config_hash=None, extra=None):
    """Write the field as raw little-endian float64 plus a JSON sidecar."""
    values = np.ascontiguousarray(field.values, dtype="<f8")
    values.tofile(path)
    meta = {
        "format": "esbgk-snapshot-v1",
        "dtype": "<f8",
        "order": "x-major",
        "n_x": field.sgrid.n_x,
        "length": field.sgrid.length,
        "v_max": field.vgrid.v_max,
        "n_per_axis": field.vgrid.n_per_axis,
        "t": t,
        "nu": nu,
        "config_hash": config_hash,
    }
    if extra:
        meta.update(extra)
    with open(snapshot_sidecar_path(path), "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
    return path


def load_snapshot(path):
    """Rebuild a DistributionField (and its grids) from a snapshot."""
    with open(snapshot_sidecar_path(path)) as fh:
        meta = json.load(fh)
    vgrid = VelocityGrid(meta["v_max"], meta["n_per_axis"])
    sgrid = SpatialGrid(meta["n_x"], meta["length"])
    data = np.fromfile(path, dtype="<f8")
    expected = sgrid.n_x * vgrid.n_nodes
    if data.size != expected:
        raise InvalidParameterError(
            "snapshot", f"expected {expected} values, file holds {data.size}"
        )
    values = data.astype(float).reshape(sgrid.n_x, vgrid.n_nodes)
    return DistributionField(values, vgrid, sgrid), meta
