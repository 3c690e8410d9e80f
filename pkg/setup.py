"""Builds the optional compiled kernels.

The package works without the extension (a pure-NumPy fallback is selected
at import time), so a failed build is downgraded to a warning.
"""

import sys

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "camflow.kernels._fastpath",
                ["src/camflow/kernels/_fastpath.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError as exc:
    print(f"camflow: skipping compiled kernels ({exc}); "
          "the pure-NumPy backend will be used", file=sys.stderr)

setup(ext_modules=ext_modules)
