"""Build script: compiles the optional text-transform kernels.

The package works without the compiled extension (a pure-Python fallback is
selected at import time), so a missing compiler or FHIRLENS_PURE_PYTHON=1
simply skips the build.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("FHIRLENS_PURE_PYTHON"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "fhirlens._kernels._ckernels",
                    ["src/fhirlens/_kernels/_ckernels.pyx"],
                    extra_compile_args=["-O2"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
