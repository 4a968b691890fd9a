"""Command-line entry point: simulate, verify and decay subcommands.

Exit codes: 0 success, 1 verification failure, 2 invalid configuration,
3 runtime failure (a state dump is written for post-mortem inspection).
"""
import argparse
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, _accel
from .config import (
    build_grids,
    build_solver_config,
    config_hash,
    load_config_file,
    parse_key_value,
    resolve_config,
    resolved_dt,
)
from .diagnostics import (
    conservation_drift,
    nu_sweep_report,
    sweep_rows_to_csv,
)
from .errors import (
    CflViolationError,
    EsbgkError,
    InvalidParameterError,
    NoConvergenceError,
    NonPositiveDensityError,
    NotSpdError,
)
from .grid import build_collision_basis
from .moments import compute_moments_batch, moment_state_csv_header, moment_state_csv_row
from .solver import initial_field, run_simulation, save_snapshot
from .verify import SUITES, all_passed, run_suites

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

RUNTIME_ERRORS = (
    NotSpdError, NoConvergenceError, NonPositiveDensityError, CflViolationError,
)


def _versions():
    return {
        "esbgk": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "kernel_backend": _accel.backend_name(),
    }


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="esbgk",
        description="Discrete-velocity ES-BGK solver and verification suite",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON or key=value config file")
        p.add_argument("--out", help="output directory (overrides config out_dir)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, help="worker threads where applicable")
        p.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE",
            help="override any config field (repeatable, JSON-typed values)",
        )

    p_sim = sub.add_parser("simulate", help="run one simulation")
    common(p_sim)

    p_ver = sub.add_parser("verify", help="run operator verification suites")
    common(p_ver)
    p_ver.add_argument("--suite", default="all", choices=SUITES + ("all",))
    p_ver.add_argument("--nu-list", default=None,
                       help="comma-separated relaxation parameters")
    p_ver.add_argument("--fields", type=int, default=1000,
                       help="random fields for the projection checks")

    p_dec = sub.add_parser("decay", help="nu sweep with decay-rate fits")
    common(p_dec)
    p_dec.add_argument("--nu-list", required=True,
                       help="comma-separated relaxation parameters")
    return parser


def _parse_nu_list(text):
    if text is None:
        return None
    items = [s for s in (t.strip() for t in text.split(",")) if s]
    if not items:
        raise InvalidParameterError("nu_list", "must not be empty")
    try:
        values = [float(s) for s in items]
    except ValueError:
        raise InvalidParameterError("nu_list", f"cannot parse {text!r}") from None
    for nu in values:
        if not -0.5 < nu < 1.0:
            raise InvalidParameterError(
                "nu_list", f"nu={nu} outside the open interval (-1/2, 1)"
            )
    return values


def _load_run_config(args):
    mappings = []
    if args.config:
        mappings.append(load_config_file(args.config))
    overrides = {}
    for item in args.set:
        overrides.update(parse_key_value(item.replace(";", "\n")))
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.out is not None:
        overrides["out_dir"] = args.out
    mappings.append(overrides)
    return resolve_config(*mappings, use_env=True)


def _write_manifest(out_dir, cfg, artifacts, wall_time, extra=None):
    payload = cfg.as_dict()
    payload["dt"] = resolved_dt(cfg)
    manifest = {
        "config": payload,
        "config_hash": config_hash(cfg),
        "versions": _versions(),
        "wall_time_s": wall_time,
        "artifacts": sorted(str(a) for a in artifacts),
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return path


def _dump_failure(out_dir, err, cfg):
    out_dir.mkdir(parents=True, exist_ok=True)
    info = {"error": type(err).__name__, "message": str(err)}
    field = getattr(err, "field_at_failure", None)
    if field is not None:
        dump = out_dir / "failure_state.bin"
        save_snapshot(str(dump), field, t=float(getattr(err, "t_at_failure", 0.0) or 0.0),
                      nu=cfg.nu if cfg else None,
                      config_hash=config_hash(cfg) if cfg else None)
        info["state_dump"] = str(dump)
    path = out_dir / "failure.json"
    with open(path, "w") as fh:
        json.dump(info, fh, indent=1, sort_keys=True)
    print(f"runtime failure: {info['message']}", file=sys.stderr)
    print(f"state dump written to {path}", file=sys.stderr)


def cmd_simulate(args):
    cfg = _load_run_config(args)
    out_dir = Path(cfg.out_dir)
    t0 = time.perf_counter()
    try:
        vgrid, sgrid = build_grids(cfg)
        F0 = initial_field(vgrid, sgrid, cfg.ic, cfg.ic_params)
        scfg = build_solver_config(cfg)
        out_dir.mkdir(parents=True, exist_ok=True)
        artifacts = []

        snapshots = []
        if cfg.snapshot_every > 0:
            def on_output(step, t, field):
                if step and step % cfg.snapshot_every == 0:
                    p = out_dir / f"snapshot_{step:08d}.bin"
                    save_snapshot(str(p), field, t=t, nu=cfg.nu,
                                  config_hash=config_hash(cfg))
                    snapshots.append(p)
        else:
            on_output = None

        final, series = run_simulation(F0, scfg, on_output=on_output)
    except RUNTIME_ERRORS as err:
        _dump_failure(out_dir, err, cfg)
        return EXIT_RUNTIME

    diag_path = out_dir / "diagnostics.csv"
    series.to_csv(str(diag_path))
    artifacts.append(diag_path)
    for p in snapshots:
        artifacts.append(p)
        artifacts.append(Path(str(p)[:-4] + ".json"))

    moments_path = out_dir / "moments.csv"
    states = compute_moments_batch(final.values, vgrid, cfg.nu)
    with open(moments_path, "w") as fh:
        fh.write(moment_state_csv_header() + "\n")
        for st in states:
            fh.write(moment_state_csv_row(st) + "\n")
    artifacts.append(moments_path)

    snap_path = out_dir / "final_snapshot.bin"
    save_snapshot(str(snap_path), final, t=scfg.t_end, nu=cfg.nu,
                  config_hash=config_hash(cfg))
    artifacts += [snap_path, Path(str(snap_path)[:-4] + ".json")]

    drift = conservation_drift(series)
    wall = time.perf_counter() - t0
    manifest_path = _write_manifest(
        out_dir, cfg, artifacts, wall,
        extra={"conservation_drift": drift, "n_outputs": len(series.times)},
    )
    print(f"simulate: {len(series.times)} outputs, wall {wall:.2f}s")
    print(f"drift: mass {drift['mass']:.3e}, momentum {drift['momentum']:.3e}, "
          f"energy {drift['energy']:.3e}")
    print(f"manifest: {manifest_path}")
    return EXIT_OK


def cmd_verify(args):
    cfg = _load_run_config(args)
    nu_list = _parse_nu_list(args.nu_list)
    names = SUITES if args.suite == "all" else (args.suite,)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    vgrid, _ = build_grids(cfg)
    basis = build_collision_basis(vgrid)
    report = run_suites(names, vgrid, basis, nu_list=nu_list,
                        n_fields=args.fields, seed=cfg.seed)
    wall = time.perf_counter() - t0
    ok = all_passed(report)
    payload = {
        "suites": report,
        "all_passed": ok,
        "grid": {"v_max": cfg.v_max, "n_per_axis": cfg.n_per_axis},
        "versions": _versions(),
        "wall_time_s": wall,
    }
    path = out_dir / "verify_report.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
    for suite, checks in report.items():
        for c in checks:
            status = "pass" if c["passed"] else "FAIL"
            print(f"[{status}] {suite}/{c['name']}: measured {c['measured']:.3e} "
                  f"(tolerance {c['tolerance']:.3e})")
    print(f"report: {path}")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_decay(args):
    cfg = _load_run_config(args)
    nu_list = _parse_nu_list(args.nu_list)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    rows = nu_sweep_report(cfg, nu_list, threads=cfg.threads)
    wall = time.perf_counter() - t0
    csv_path = out_dir / "decay_table.csv"
    sweep_rows_to_csv(rows, str(csv_path))
    summary = {
        "rows": rows,
        "config_hash": config_hash(cfg),
        "versions": _versions(),
        "wall_time_s": wall,
    }
    json_path = out_dir / "decay_summary.json"
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
    failed = [r for r in rows if r.get("error")]
    for r in rows:
        if r.get("error"):
            print(f"nu={r['nu']:+.6g}: ERROR {r['error']}")
        else:
            print(f"nu={r['nu']:+.6g}: Pr={r['prandtl']:.6g} "
                  f"rate={r.get('decay_rate', float('nan')):.6g} "
                  f"mass_drift={r['mass_drift']:.3e}")
    print(f"table: {csv_path}")
    return EXIT_RUNTIME if failed else EXIT_OK


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "decay":
            return cmd_decay(args)
    except InvalidParameterError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except EsbgkError as err:
        print(f"runtime failure: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
