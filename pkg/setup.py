"""Build script for the optional compiled kernels.

The package works without the extension (a NumPy fallback is selected at
import time); set PATCHLV_NO_EXT=1 to skip the build entirely.
"""

import os

from setuptools import setup

extensions = []
if not os.environ.get("PATCHLV_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools.extension import Extension

        extensions = cythonize(
            [
                Extension(
                    "patchlv._kernels",
                    ["src/patchlv/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        extensions = []

setup(ext_modules=extensions)
