"""Build script: compiles the Cython kernel core when possible.

The package works without the extension (a numpy fallback with identical
semantics is selected at import time), so a failed or skipped build is not
fatal.  Set SHIFTLAB_NO_EXT=1 to skip the compile step entirely.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SHIFTLAB_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "shiftlab._kernels._core",
                    ["src/shiftlab/_kernels/_core.pyx"],
                    # -ffp-contract=off: no FMA fusion, so the compiled kernels
                    # are bit-identical to the numpy fallback's mul-then-add.
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
