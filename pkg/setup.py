import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "heraldopt.kernels._speedups",
                ["src/heraldopt/kernels/_speedups.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    # Cython unavailable: install with the pure-numpy kernels only.
    ext_modules = []

setup(ext_modules=ext_modules)
