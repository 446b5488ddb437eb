from __future__ import annotations

import os

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# The kernel draws Gaussians through numpy's C API; the implementations live
# in the static npyrandom library shipped inside the numpy wheel.
_NPYRANDOM_LIB = os.path.join(os.path.dirname(numpy.__file__), "random", "lib")

extensions = [
    Extension(
        "pptrimer._kernel_cy",
        sources=["src/pptrimer/_kernel_cy.pyx"],
        include_dirs=[numpy.get_include()],
        library_dirs=[_NPYRANDOM_LIB],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # -ffp-contract=off keeps the compiled arithmetic bit-identical to the
        # numpy fallback: no fused multiply-adds that the interpreter would not emit.
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(extensions, language_level=3),
)
