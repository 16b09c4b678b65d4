"""Build script: compiles the CSR matvec kernel when Cython is available.

The package works without the extension (a numpy fallback is selected at
import time), so a failed extension build is not fatal for development
installs: run with CLOCKHAM_SKIP_EXT=1 to skip it explicitly.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("CLOCKHAM_SKIP_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "clockham._kernels._csr",
                    ["src/clockham/_kernels/_csr.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
