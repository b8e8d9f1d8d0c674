import os

import numpy as np
from setuptools import Extension, setup

# The compiled kernel is optional: without Cython the package falls back to
# the pure-Python implementation in holderweyl.spectral._ldl_py.
try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("HOLDERWEYL_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "holderweyl.spectral._ldl_cy",
                ["src/holderweyl/spectral/_ldl_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
