"""Build script for the compiled Lindblad kernels.

The extension is optional: if Cython or a C compiler is unavailable the
package installs without it and falls back to the NumPy/SciPy kernels.
"""

import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("OSCSWAP_NO_EXT", "") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "oscswap._ckernels",
                    ["src/oscswap/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-fcx-limited-range"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
