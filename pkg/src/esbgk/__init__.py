"""Discrete-velocity ES-BGK solver and verification suite."""

__version__ = "0.1.0"

from ._accel import backend_name  # noqa: F401
from .grid import (  # noqa: F401
    CollisionBasis,
    VelocityGrid,
    build_collision_basis,
    build_velocity_grid,
    integrate_moment,
    sample_global_maxwellian,
)
from .moments import (  # noqa: F401
    MomentState,
    SpdReport,
    check_spd_and_det,
    compute_moments,
    equivalence_bounds,
)
from .gaussian import (  # noqa: F401
    GaussianSpec,
    build_gaussian,
    conservative_correction,
    gaussian_from_params,
)
from .linearized import (  # noqa: F401
    PerturbationField,
    apply_Lnu,
    coercivity_gap,
    from_perturbation,
    macro_coefficients,
    macro_projection,
    project_P0,
    project_P1,
    project_P2,
    to_perturbation,
)
from .solver import (  # noqa: F401
    DistributionField,
    SolverConfig,
    SpatialGrid,
    relaxation_step,
    run_simulation,
    strang_step,
    transport_step,
)
from .diagnostics import (  # noqa: F401
    DecayFit,
    DiagnosticsSeries,
    conservation_drift,
    entropy,
    fit_decay_rate,
    nu_sweep_report,
)
