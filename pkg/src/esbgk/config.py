"""Run configuration: parsing, validation, environment overrides, hashing.

Config files are JSON or flat key=value lines; values in the key=value form
are parsed as JSON scalars/lists where possible. Environment variables with
the ESBGK_ prefix override file values; explicit CLI flags override both.
"""
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .solver import SolverConfig, SpatialGrid
from .grid import VelocityGrid

ENV_PREFIX = "ESBGK_"

IC_NAMES = ("maxwellian", "cosine_density", "anisotropic_gaussian", "snapshot")


@dataclass
class RunConfig:
    """Everything a reproducible run needs; validated before any allocation."""

    nu: float = 0.0
    t_end: float = 1.0
    dt: float = None          # derived from cfl*dx/v_max when omitted
    cfl: float = 0.9
    conservative_mode: bool = True
    transport_scheme: str = "upwind1"
    v_max: float = 8.0
    n_per_axis: int = 32
    n_x: int = 32
    length: float = 2.0 * np.pi
    ic: str = "maxwellian"
    ic_params: dict = field(default_factory=dict)
    seed: int = 0
    output_every: int = 10
    snapshot_every: int = 0   # 0 disables intermediate snapshots
    newton_tol: float = 1e-14
    max_newton: int = 25
    threads: int = 1
    out_dir: str = "out"

    def as_dict(self):
        return asdict(self)



def _coerce(name, value):
    if name not in RunConfig.__dataclass_fields__:
        raise InvalidParameterError(name, "unknown configuration field")
    if value is None:
        return None
    if name == "ic_params":
        if not isinstance(value, dict):
            raise InvalidParameterError(name, "must be a mapping")
        return dict(value)
    target = {
        "nu": float, "t_end": float, "dt": float, "cfl": float,
        "v_max": float, "length": float, "newton_tol": float,
        "n_per_axis": int, "n_x": int, "seed": int, "output_every": int,
        "snapshot_every": int, "max_newton": int, "threads": int,
        "conservative_mode": bool, "transport_scheme": str, "ic": str,
        "out_dir": str,
    }[name]
    if target is bool and isinstance(value, str):
        low = value.strip().lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise InvalidParameterError(name, f"cannot parse boolean from {value!r}")
    try:
        return target(value)
    except (TypeError, ValueError):
        raise InvalidParameterError(name, f"cannot convert {value!r} to {target.__name__}") from None


def parse_key_value(text):
    """Flat key=value grammar: one pair per line, '#' comments, JSON values,
    dotted keys nest (ic_params.amplitude=0.01)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameterError("config", f"line {lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            parsed = json.loads(val)
        except json.JSONDecodeError:
            parsed = val
        target = out
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = parsed
    return out


def load_config_file(path):
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as err:
            raise InvalidParameterError("config", f"invalid JSON: {err}") from None
    return parse_key_value(text)


def env_overrides(environ=None):
    """ESBGK_<FIELD> values (field names upper-cased) as a config mapping."""
    environ = os.environ if environ is None else environ
    out = {}
    for name in RunConfig.__dataclass_fields__:
        key = ENV_PREFIX + name.upper()
        if key in environ:
            raw = environ[key]
            try:
                out[name] = json.loads(raw)
            except json.JSONDecodeError:
                out[name] = raw
    return out


def resolve_config(*mappings, use_env=False):
    """Merge config mappings left-to-right, coerce types and validate."""
    merged = {}
    sources = list(mappings)
    if use_env:
        sources.insert(1 if sources else 0, env_overrides())
    for mapping in sources:
        for key, value in (mapping or {}).items():
            merged[key] = value
    kwargs = {name: _coerce(name, value) for name, value in merged.items()}
    cfg = RunConfig(**kwargs)
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    if not -0.5 < cfg.nu < 1.0:
        raise InvalidParameterError(
            "nu", f"must lie in the open interval (-1/2, 1), got {cfg.nu}"
        )
    if not cfg.v_max > 0:
        raise InvalidParameterError("v_max", "must be positive")
    if cfg.n_per_axis < 4 or cfg.n_per_axis % 2:
        raise InvalidParameterError("n_per_axis", "must be an even integer >= 4")
    if cfg.n_x < 1:
        raise InvalidParameterError("n_x", "must be >= 1")
    if not cfg.length > 0:
        raise InvalidParameterError("length", "must be positive")
    if not 0 < cfg.cfl <= 1:
        raise InvalidParameterError("cfl", "must lie in (0, 1]")
    if cfg.t_end < 0:
        raise InvalidParameterError("t_end", "must be non-negative")
    if cfg.transport_scheme not in ("upwind1", "none"):
        raise InvalidParameterError("transport_scheme", "must be 'upwind1' or 'none'")
    if cfg.ic not in IC_NAMES:
        raise InvalidParameterError("ic", f"must be one of {IC_NAMES}")
    if cfg.ic == "cosine_density":
        amp = float(cfg.ic_params.get("amplitude", 0.01))
        if not abs(amp) < 1.0:
            raise InvalidParameterError(
                "ic_params.amplitude", "|amplitude| must be < 1 so that F0 > 0"
            )
    if cfg.ic == "snapshot" and "path" not in cfg.ic_params:
        raise InvalidParameterError("ic_params.path", "snapshot initial condition needs a path")
    if cfg.output_every < 1:
        raise InvalidParameterError("output_every", "must be >= 1")
    if cfg.snapshot_every < 0:
        raise InvalidParameterError("snapshot_every", "must be >= 0")
    if cfg.threads < 1:
        raise InvalidParameterError("threads", "must be >= 1")
    if cfg.max_newton < 1:
        raise InvalidParameterError("max_newton", "must be >= 1")
    if not cfg.newton_tol > 0:
        raise InvalidParameterError("newton_tol", "must be positive")
    dx = cfg.length / cfg.n_x
    transport_on = cfg.transport_scheme != "none" and cfg.n_x > 1
    if cfg.dt is not None:
        if not cfg.dt > 0:
            raise InvalidParameterError("dt", "must be positive")
        if transport_on and cfg.dt > cfg.cfl * dx / cfg.v_max * (1 + 1e-12):
            raise InvalidParameterError(
                "dt", f"violates the CFL bound cfl*dx/v_max = {cfg.cfl * dx / cfg.v_max:.6g}"
            )
    return cfg


def resolved_dt(cfg):
    if cfg.dt is not None:
        return cfg.dt
    return cfg.cfl * (cfg.length / cfg.n_x) / cfg.v_max


def build_grids(cfg):
    return VelocityGrid(cfg.v_max, cfg.n_per_axis), SpatialGrid(cfg.n_x, cfg.length)


def build_solver_config(cfg):
    return SolverConfig(
        nu=cfg.nu, dt=resolved_dt(cfg), t_end=cfg.t_end, cfl=cfg.cfl,
        conservative_mode=cfg.conservative_mode,
        transport_scheme=cfg.transport_scheme,
        output_every=cfg.output_every,
        newton_tol=cfg.newton_tol, max_newton=cfg.max_newton,
    )


def config_hash(cfg):
    """SHA-256 of the canonical JSON form (sorted keys, resolved dt)."""
    payload = cfg.as_dict()
    payload["dt"] = resolved_dt(cfg)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()
