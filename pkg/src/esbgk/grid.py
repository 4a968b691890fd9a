"""Truncated discrete velocity space, quadrature and the 13-moment basis.

Everything downstream (moments, Gaussians, projections, the solver) runs
through the midpoint-rule quadrature built here. The grid is symmetric
under v -> -v by construction, which makes odd moments cancel exactly.
"""
import numpy as np

from . import _accel
from .errors import DegenerateBasisError, InvalidParameterError

INV_SQRT_2PI_CUBED = (2.0 * np.pi) ** -1.5


class VelocityGrid:
    """Uniform Cartesian midpoint grid on [-v_max, v_max]^3.

    Immutable after construction (arrays are write-protected); safe to share
    across workers. Node ordering is row-major over (axis0, axis1, axis2).
    """

    def __init__(self, v_max, n_per_axis):
        if not v_max > 0:
            raise InvalidParameterError("v_max", "must be positive")
        n = int(n_per_axis)
        if n != n_per_axis or n < 4:
            raise InvalidParameterError("n_per_axis", "must be an integer >= 4")
        if n % 2 != 0:
            raise InvalidParameterError(
                "n_per_axis", "must be even to preserve v -> -v symmetry"
            )
        self.v_max = float(v_max)
        self.n_per_axis = n
        self.h = 2.0 * self.v_max / n
        # (k - (n-1)/2)*h negates exactly under k -> n-1-k in floating point
        self.axis = (np.arange(n) - (n - 1) / 2.0) * self.h
        g = np.meshgrid(self.axis, self.axis, self.axis, indexing="ij")
        self.nodes = np.stack([a.ravel() for a in g], axis=1)
        self.n_nodes = self.nodes.shape[0]
        self.weights = np.full(self.n_nodes, self.h**3)
        self.v_sq = (
            self.nodes[:, 0] ** 2 + self.nodes[:, 1] ** 2 + self.nodes[:, 2] ** 2
        )
        self.mu = INV_SQRT_2PI_CUBED * np.exp(-0.5 * self.v_sq)
        self.sqrt_mu = np.sqrt(self.mu)
        # psi10 rows: 1, v1, v2, v3, v1^2, v2^2, v3^2, v1v2, v2v3, v3v1
        # (same component order as the G tensor's R^6 packing)
        v1, v2, v3 = self.nodes.T
        self.psi10 = np.stack(
            [np.ones_like(v1), v1, v2, v3, v1 * v1, v2 * v2, v3 * v3,
             v1 * v2, v2 * v3, v3 * v1]
        )
        for arr in (self.axis, self.nodes, self.weights, self.v_sq, self.mu,
                    self.sqrt_mu, self.psi10):
            arr.setflags(write=False)

    @property
    def cell_volume(self):
        return self.h**3

    def __repr__(self):
        return f"VelocityGrid(v_max={self.v_max}, n_per_axis={self.n_per_axis})"


def build_velocity_grid(v_max=8.0, n_per_axis=32):
    """Construct the default truncated velocity grid (midpoint weights)."""
    return VelocityGrid(v_max, n_per_axis)


def sample_global_maxwellian(grid):
    """Values of the normalized global Maxwellian at every node."""
    return grid.mu.copy()


def integrate_moment(grid, field_values, weight_fn=None):
    """Quadrature of field_values against an optional per-node weight.

    weight_fn may be a callable of the (N, 3) node array, a length-N array,
    or None (weight 1). Summation is compensated and order-fixed, so results
    are reproducible across runs.
    """
    f = np.asarray(field_values, dtype=float)
    if f.shape != (grid.n_nodes,):
        raise InvalidParameterError(
            "field_values", f"expected length {grid.n_nodes}, got {f.shape}"
        )
    if weight_fn is None:
        g = np.ones(grid.n_nodes)
    elif callable(weight_fn):
        g = np.asarray(weight_fn(grid.nodes), dtype=float)
        if g.ndim == 0:
            g = np.full(grid.n_nodes, float(g))
    else:
        g = np.asarray(weight_fn, dtype=float)
    if g.shape != (grid.n_nodes,):
        raise InvalidParameterError(
            "weight_fn", f"weight must evaluate to length {grid.n_nodes}"
        )
    return _accel.kernels.weighted_dot(
        grid.weights, np.ascontiguousarray(f), np.ascontiguousarray(g)
    )


class CollisionBasis:
    """Discretely orthonormalized 13-function moment basis.

    raw_functions holds the sampled functions
    {sqrt_mu, v_i sqrt_mu, v_i v_j sqrt_mu (i<j), v_i^2 sqrt_mu,
    v_i |v|^2 sqrt_mu}; ortho_functions is an orthonormal basis of the same
    span, ordered so that index prefixes realize the three projections:
    invariant_span (5 functions, collision invariants), p1_span (2 trace-free
    diagonal functions), p2_span (3 off-diagonal functions).
    """

    def __init__(self, grid, raw_functions, ortho_functions):
        self.grid = grid
        self.raw_functions = raw_functions
        self.ortho_functions = ortho_functions
        self.invariant_span = (0, 1, 2, 3, 4)
        self.p1_span = (5, 6)
        self.p2_span = (7, 8, 9)
        for arr in (self.raw_functions, self.ortho_functions):
            arr.setflags(write=False)

    def coefficients(self, fields):
        """Inner products of fields (C, N) or (N,) with the orthonormal basis."""
        f = np.atleast_2d(np.asarray(fields, dtype=float))
        return _accel.kernels.moments_batch(self.ortho_functions, self.grid.weights, f)

    def reconstruct(self, coeffs, span=None):
        c = np.atleast_2d(np.asarray(coeffs, dtype=float))
        basis = self.ortho_functions if span is None else self.ortho_functions[list(span)]
        return c @ basis

    def gram_matrix(self):
        w = self.grid.weights
        return (self.ortho_functions * w) @ self.ortho_functions.T


def raw_basis_functions(grid):
    """The 13 sampled basis functions in their natural listing order."""
    v1, v2, v3 = grid.nodes.T
    s = grid.sqrt_mu
    return np.stack([
        s, v1 * s, v2 * s, v3 * s,
        v1 * v2 * s, v2 * v3 * s, v3 * v1 * s,
        v1 * v1 * s, v2 * v2 * s, v3 * v3 * s,
        v1 * grid.v_sq * s, v2 * grid.v_sq * s, v3 * grid.v_sq * s,
    ])


def trace_free_diagonal(grid, i):
    """Sampled (3 v_i^2 - |v|^2) sqrt_mu, before normalization."""
    return (3.0 * grid.nodes[:, i] ** 2 - grid.v_sq) * grid.sqrt_mu


def build_collision_basis(grid):
    """Orthonormalize the 13-moment basis against the discrete quadrature.

    Modified Gram-Schmidt with one reorthogonalization pass. The sequence
    fed to Gram-Schmidt spans the same space as the raw functions but lists
    the collision invariants first, then the two independent trace-free
    diagonal functions, then the off-diagonal pairs, so the P0/P1/P2 spans
    are realized by index ranges.
    """
    raw = raw_basis_functions(grid)
    v1, v2, v3 = grid.nodes.T
    s = grid.sqrt_mu
    norm_c = 1.0 / (3.0 * np.sqrt(2.0))
    seq = np.stack([
        s, v1 * s, v2 * s, v3 * s, grid.v_sq * s,
        trace_free_diagonal(grid, 0) * norm_c,
        trace_free_diagonal(grid, 1) * norm_c,
        v1 * v2 * s, v2 * v3 * s, v3 * v1 * s,
        v1 * grid.v_sq * s, v2 * grid.v_sq * s, v3 * grid.v_sq * s,
    ])
    w = grid.weights
    ortho = np.array(seq, dtype=float)
    for _ in range(2):  # MGS + one reorthogonalization pass
        for k in range(ortho.shape[0]):
            for j in range(k):
                ortho[k] -= np.dot(w * ortho[j], ortho[k]) * ortho[j]
            nrm = np.sqrt(np.dot(w * ortho[k], ortho[k]))
            ref = np.sqrt(np.dot(w * seq[k], seq[k]))
            if not nrm > 1e-8 * ref:
                raise DegenerateBasisError(
                    f"basis function {k} lost independence (grid too coarse)"
                )
            ortho[k] /= nrm
    basis = CollisionBasis(grid, raw, ortho)
    gram_err = np.abs(basis.gram_matrix() - np.eye(13)).max()
    if gram_err > 1e-12:
        raise DegenerateBasisError(
            f"orthonormalization failed: Gram deviation {gram_err:.3e}"
        )
    return basis
