"""Post-processing: conservation drift, entropy, decay-rate fits, nu sweeps."""
import csv
import io
from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import InsufficientSamplesError, InvalidParameterError

MOMENTUM_ABS_SWITCH = 1e-12
DRIFT_FLOOR = 1e-30


@dataclass
class DiagnosticsSeries:
    """Time series of the solver's scalar diagnostics."""

    times: np.ndarray
    mass: np.ndarray
    momentum: np.ndarray  # (n, 3)
    energy: np.ndarray
    entropy: np.ndarray
    entropy_flags: np.ndarray
    perturbation_l2: np.ndarray
    min_F: np.ndarray
    spd_margin: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        for name in ("mass", "energy", "entropy", "entropy_flags",
                     "perturbation_l2", "min_F", "spd_margin"):
            if len(getattr(self, name)) != n:
                raise InvalidParameterError(name, "series length mismatch")
        if self.momentum.shape != (n, 3):
            raise InvalidParameterError("momentum", "expected shape (n, 3)")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise InvalidParameterError("times", "must be strictly increasing")

    CSV_COLUMNS = (
        "t", "mass", "momentum1", "momentum2", "momentum3", "energy",
        "entropy", "entropy_flags", "perturbation_l2", "min_F", "spd_margin",
    )

    def to_csv(self, path_or_buf):
        """Deterministic CSV: fixed column order, repr-exact float formatting."""
        own = isinstance(path_or_buf, (str, bytes))
        fh = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            fh.write(",".join(self.CSV_COLUMNS) + "\n")
            for i in range(len(self.times)):
                vals = [
                    self.times[i], self.mass[i], self.momentum[i, 0],
                    self.momentum[i, 1], self.momentum[i, 2], self.energy[i],
                    self.entropy[i], int(self.entropy_flags[i]),
                    self.perturbation_l2[i], self.min_F[i], self.spd_margin[i],
                ]
                fh.write(",".join(
                    str(v) if isinstance(v, int) else f"{v:.17g}" for v in vals
                ) + "\n")
        finally:
            if own:
                fh.close()

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        def col(name, typ=float):
            return np.array([typ(r[name]) for r in rows])
        return cls(
            times=col("t"),
            mass=col("mass"),
            momentum=np.stack([col(f"momentum{i}") for i in (1, 2, 3)], axis=1),
            energy=col("energy"),
            entropy=col("entropy"),
            entropy_flags=col("entropy_flags", int),
            perturbation_l2=col("perturbation_l2"),
            min_F=col("min_F"),
            spd_margin=col("spd_margin"),
        )


def entropy(F, vgrid, dx=1.0):
    """Discrete entropy sum_x dx sum_v w F log F over nodes with F > 0.

    Returns (value, count of non-positive nodes). The F log F -> 0 limit
    justifies dropping non-positive nodes; they are counted, not hidden.
    The x-measure is dx per cell (use dx=1 for a unit homogeneous measure).
    """
    f = np.atleast_2d(np.asarray(F, dtype=float))
    sums, counts = _accel.kernels.entropy_sums(vgrid.weights, f)
    return dx * float(sums.sum()), int(counts.sum())


def conservation_drift(series):
    """Max drift per invariant relative to its t=0 value.

    Momentum components switch to absolute drift when |Q(0)| < 1e-12 (they
    are typically zero by symmetry).
    """
    if len(series.times) == 0:
        raise InvalidParameterError("series", "empty diagnostics series")

    def rel(q):
        q0 = q[0]
        return float(np.abs(q - q0).max() / max(abs(q0), DRIFT_FLOOR))

    out = {"mass": rel(series.mass), "energy": rel(series.energy)}
    mom = []
    for i in range(3):
        q = series.momentum[:, i]
        if abs(q[0]) < MOMENTUM_ABS_SWITCH:
            mom.append(float(np.abs(q - q[0]).max()))
        else:
            mom.append(rel(q))
    out["momentum"] = max(mom)
    out["momentum_components"] = mom
    return out


@dataclass
class DecayFit:
    rate: float
    intercept: float
    r_squared: float
    window: tuple
    n_samples: int


def fit_decay_rate(times, values, window=None):
    """Least-squares exponential fit: line on (t, log value); rate = -slope.

    Non-positive values inside the window shrink it to the last positive
    prefix. Fewer than 10 usable samples is an error.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, v = t[sel], v[sel]
    nonpos = np.where(v <= 0.0)[0]
    if nonpos.size:
        t, v = t[: nonpos[0]], v[: nonpos[0]]
    if len(t) < 10:
        raise InsufficientSamplesError(
            f"decay fit needs >= 10 positive samples, got {len(t)}"
        )
    logv = np.log(v)
    slope, intercept = np.polyfit(t, logv, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((logv - pred) ** 2))
    ss_tot = float(np.sum((logv - logv.mean()) ** 2))
    r2 = 1.0 if ss_tot < 1e-300 else 1.0 - ss_res / ss_tot
    return DecayFit(
        rate=-float(slope), intercept=float(intercept), r_squared=float(r2),
        window=(float(t[0]), float(t[-1])), n_samples=len(t),
    )


def second_half_window(series):
    """Default fit window: the second half of the run (skips the transient)."""
    t0, t1 = series.times[0], series.times[-1]
    return (0.5 * (t0 + t1), t1)


def entropy_violations(series, tol=1e-10):
    """Number of recorded intervals where entropy increased by more than tol."""
    de = np.diff(series.entropy)
    return int(np.sum(de > tol)), float(de.max(initial=0.0))


def prandtl_number(nu):
    return 1.0 / (1.0 - nu)


def nu_sweep_report(config_base, nu_list, threads=1):
    """Run identical initial data across nu values and tabulate the results.

    Returns a list of row dicts (one per nu). A failed run yields a row
    with an 'error' marker instead of aborting the sweep.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .config import build_grids, build_solver_config, resolve_config
    from .solver import initial_field, run_simulation

    if not nu_list:
        raise InvalidParameterError("nu_list", "must not be empty")

    def one(nu):
        cfg = resolve_config({**config_base.as_dict(), "nu": nu})
        vgrid, sgrid = build_grids(cfg)
        F0 = initial_field(vgrid, sgrid, cfg.ic, cfg.ic_params)
        row = {"nu": nu, "prandtl": prandtl_number(nu), "error": ""}
        try:
            _, series = run_simulation(F0, build_solver_config(cfg))
        except Exception as err:  # recorded per-row, sweep continues
            row["error"] = f"{type(err).__name__}: {err}"
            return row
        drift = conservation_drift(series)
        nviol, worst = entropy_violations(series)
        row.update(
            mass_drift=drift["mass"],
            momentum_drift=drift["momentum"],
            energy_drift=drift["energy"],
            entropy_violations=nviol,
            entropy_worst_increase=worst,
        )
        try:
            fit = fit_decay_rate(
                series.times, series.perturbation_l2, second_half_window(series)
            )
            row.update(decay_rate=fit.rate, decay_r_squared=fit.r_squared)
        except InsufficientSamplesError as err:
            row["error"] = f"InsufficientSamplesError: {err}"
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, nu_list))
    else:
        rows = [one(nu) for nu in nu_list]
    return rows


SWEEP_COLUMNS = (
    "nu", "prandtl", "mass_drift", "momentum_drift", "energy_drift",
    "entropy_violations", "entropy_worst_increase", "decay_rate",
    "decay_r_squared", "error",
)


def sweep_rows_to_csv(rows, path_or_buf):
    own = isinstance(path_or_buf, (str, bytes))
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            cells = []
            for col in SWEEP_COLUMNS:
                v = row.get(col, "")
                if isinstance(v, float):
                    cells.append(f"{v:.17g}")
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")
    finally:
        if own:
            fh.close()


def sweep_rows_to_text(rows):
    buf = io.StringIO()
    sweep_rows_to_csv(rows, buf)
    return buf.getvalue()
