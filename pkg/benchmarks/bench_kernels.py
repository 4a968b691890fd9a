#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the NumPy fallback.

Runs each hot kernel at desk scale (32768 velocity nodes x 16 cells) plus
one full relaxation step end-to-end, and prints median wall times. Usage:

    python benchmarks/bench_kernels.py [--cells N] [--repeats R]
"""
import argparse
import os
import time

import numpy as np

os.environ.setdefault("ESBGK_BACKEND", "")  # default selection; forced below

from esbgk import _accel  # noqa: E402
from esbgk.grid import build_velocity_grid  # noqa: E402
from esbgk.solver import SpatialGrid, cosine_density_field  # noqa: E402


def median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def kernel_cases(grid, cells):
    sgrid = SpatialGrid(cells, 2 * np.pi)
    F = cosine_density_field(grid, sgrid, 0.01).values
    g = np.abs(F) + 0.05
    lam = np.full((cells, 10), 1e-9)
    rho = np.ones(cells)
    U = np.zeros((cells, 3))
    chol = np.tile(np.eye(3), (cells, 1, 1))
    log_norm = np.full(cells, -1.5 * np.log(2 * np.pi))
    cou = np.ascontiguousarray(grid.nodes[:, 0] * 1e-3)
    coef = np.full(cells, 0.1)
    psi, w = grid.psi10, grid.weights
    return {
        "moments_batch": lambda k: k.moments_batch(psi, w, F),
        "weighted_gram": lambda k: k.weighted_gram(psi, w, g),
        "gaussian_eval": lambda k: k.gaussian_eval(grid.nodes, rho, U, chol, log_norm),
        "tilt_apply": lambda k: k.tilt_apply(g, psi, lam),
        "upwind_sweep": lambda k: k.upwind_sweep(F, cou),
        "entropy_sums": lambda k: k.entropy_sums(w, F),
        "relax_combine": lambda k: k.relax_combine(F, g, coef),
    }


def relaxation_case(grid, cells):
    from esbgk.solver import relaxation_step

    sgrid = SpatialGrid(cells, 2 * np.pi)
    field = cosine_density_field(grid, sgrid, 0.01)

    def run():
        relaxation_step(field, dt=1e-3, nu=0.5, conservative_mode=True)

    return run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cells", type=int, default=16)
    parser.add_argument("--n-per-axis", type=int, default=32)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    backends = {name: _accel.load_backend(name) for name in _accel.available_backends()}
    if "compiled" not in backends:
        print("note: compiled extension not built; benchmarking the fallback only")

    grid = build_velocity_grid(8.0, args.n_per_axis)
    cases = kernel_cases(grid, args.cells)

    width = max(len(n) for n in cases) + 2
    header = f"{'kernel':<{width}}" + "".join(f"{n:>12}" for n in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(f"grid: {args.n_per_axis}^3 nodes x {args.cells} cells, "
          f"median of {args.repeats}")
    print(header)
    print("-" * len(header))
    for name, case in cases.items():
        row = f"{name:<{width}}"
        times = {}
        for bname, backend in backends.items():
            times[bname] = median_time(lambda b=backend: case(b), args.repeats)
            row += f"{times[bname] * 1e3:>10.2f}ms"
        if len(times) == 2:
            row += f"{times['numpy'] / times['compiled']:>9.2f}x"
        print(row)

    # end-to-end relaxation step: flips the active backend via the env knob
    print()
    run = relaxation_case(grid, args.cells)
    row = f"{'relaxation_step':<{width}}"
    times = {}
    for bname, backend in backends.items():
        _accel.kernels = backend
        for kname in _accel._KERNEL_NAMES:
            setattr(_accel, kname, getattr(backend, kname))
        times[bname] = median_time(run, max(3, args.repeats // 2))
        row += f"{times[bname] * 1e3:>10.2f}ms"
    if len(times) == 2:
        row += f"{times['numpy'] / times['compiled']:>9.2f}x"
    print(row)


if __name__ == "__main__":
    main()
