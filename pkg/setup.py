"""Build hook for the optional compiled evaluation kernel.

The package is fully functional without the extension (a numpy fallback is
selected at import time); set ATDECOR_NO_EXT=1 to skip compilation.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("ATDECOR_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "atdecor._native",
                    ["src/atdecor/_native.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
