"""Build script: compiles the optional Cython kernel core.

Set BEAMOPT_PURE_PYTHON=1 to skip the extension entirely; the package then
runs on the NumPy fallback kernels.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("BEAMOPT_PURE_PYTHON") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "beamopt._kernels",
                    ["src/beamopt/_kernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        print("Cython unavailable; installing with the pure-Python kernels only")

setup(ext_modules=ext_modules)
