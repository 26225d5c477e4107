"""Build script for the optional compiled match kernel.

The package works without the extension (a pure-Python kernel is selected at
import time), so a failed compile only costs performance.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "signalql._native",
                ["src/signalql/_native.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    sys.stderr.write(f"signalql: skipping native kernel build ({exc})\n")

setup(ext_modules=ext_modules)
