"""Build script: compiles the optional accelerated kernel extension.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so any Cython/compiler failure downgrades to a
pure-Python install instead of aborting.
"""
import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("ESBGK_PURE_PYTHON"):
        return []
    if not os.path.exists("src/esbgk/_accel/_core.pyx"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    compile_args = ["-O3"]
    link_args = []
    if not os.environ.get("ESBGK_NO_OPENMP"):
        compile_args.append("-fopenmp")
        link_args.append("-fopenmp")
    ext = Extension(
        "esbgk._accel._core",
        sources=["src/esbgk/_accel/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=compile_args,
        extra_link_args=link_args,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions())
