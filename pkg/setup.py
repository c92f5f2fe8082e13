"""Build the optional compiled propagation kernel.

The package works without it (a pure-Python engine is selected at import),
so a missing Cython or compiler only skips the extension.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("ADME_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            ["src/adme/solver/_kernel.pyx"],
            compiler_directives={"language_level": 3},
            quiet=True,
        )

setup(ext_modules=ext_modules)
