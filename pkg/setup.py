"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time), so a failed or skipped extension build is not fatal.
"""

import os

from setuptools import Extension, setup

try:
    if not os.path.exists("src/msplab/_kernels/_compiled.pyx"):
        raise ImportError("kernel source not present")
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "msplab._kernels._compiled",
                ["src/msplab/_kernels/_compiled.pyx"],
                extra_compile_args=["-O3"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
