"""Build script: compiles the optional speedup extension when Cython is available.

The package works without the extension; ``driftlab._core`` falls back to the
pure-Python kernels at import time. Any failure here (missing Cython, missing
compiler) downgrades to a pure-Python install instead of aborting.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/driftlab/_core/_speed.pyx"],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
