"""Builds the optional compiled solver kernels.

The package works without the extension (a numpy fallback is selected at
import time), so the build is marked optional and a failed compile only
emits a warning.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extension = Extension(
    "subgoal_align._kernels",
    sources=["src/subgoal_align/_kernels.pyx"],
    include_dirs=[numpy.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    # -ffp-contract=off keeps results bit-identical to the numpy fallback
    # (no FMA fusion inside the accumulation loops)
    extra_compile_args=["-O3", "-ffp-contract=off"],
    optional=True,
)

setup(ext_modules=cythonize([extension], language_level="3"))
