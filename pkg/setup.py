"""Build the optional Cython clipping kernel.

The package works without it: ``realspace_qc.voronoi`` falls back to the
pure-Python clipper when the compiled module is missing.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("REALSPACE_QC_PURE_PYTHON") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "realspace_qc._clip",
                    ["src/realspace_qc/_clip.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
