"""Build script for the optional compiled kernels.

The package is fully functional without the extension: qkdsim._kernels falls
back to the numpy implementation when qkdsim._kernels._core is missing.
"""

import warnings

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "qkdsim._kernels._core",
                ["src/qkdsim/_kernels/_core.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    warnings.warn("Cython not available; installing with the numpy kernel fallback only")
    ext_modules = []

setup(ext_modules=ext_modules)
