"""Build script for the optional compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); building it makes training several times faster.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext = Extension(
        "prelude.kernels._core",
        ["src/prelude/kernels/_core.pyx", "src/prelude/kernels/_kernelimpl.c"],
        include_dirs=[np.get_include(), "src/prelude/kernels"],
        extra_compile_args=[
            "-O3",
            "-march=native",
            "-ffast-math",
            "-fopenmp",
        ],
        extra_link_args=["-fopenmp", "-lmvec", "-lm"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], language_level="3")
except Exception as exc:  # pragma: no cover - build host without toolchain
    sys.stderr.write(f"warning: compiled kernels disabled ({exc}); "
                     "falling back to numpy backend\n")
    ext_modules = []

setup(ext_modules=ext_modules)
