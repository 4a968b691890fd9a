"""Kernel backend selection.

The compiled Cython core is preferred when present; the NumPy fallback is
selected otherwise. Set ESBGK_BACKEND=numpy to force the fallback (used by
the benchmark and the cross-backend tests).
"""
import os

from . import numpy_backend

_KERNEL_NAMES = (
    "weighted_dot",
    "moments_batch",
    "weighted_gram",
    "gaussian_eval",
    "tilt_apply",
    "upwind_sweep",
    "entropy_sums",
    "relax_combine",
)


def _load_compiled():
    try:
        from . import _core
    except ImportError:
        return None
    return _core


def load_backend(name):
    """Return a kernel module by name ('numpy' or 'compiled'), or None."""
    if name == "numpy":
        return numpy_backend
    if name == "compiled":
        return _load_compiled()
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    names = ["numpy"]
    if _load_compiled() is not None:
        names.append("compiled")
    return names


_forced = os.environ.get("ESBGK_BACKEND", "").strip().lower()
if _forced in ("numpy", "python"):
    kernels = numpy_backend
elif _forced == "compiled":
    kernels = _load_compiled()
    if kernels is None:
        raise ImportError("ESBGK_BACKEND=compiled but the extension is not built")
else:
    kernels = _load_compiled() or numpy_backend


def backend_name():
    """Name of the active kernel backend ('numpy' or 'compiled')."""
    return kernels.NAME


globals().update({name: getattr(kernels, name) for name in _KERNEL_NAMES})
