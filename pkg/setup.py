"""Build script: compiles the optional Cython inference kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a missing compiler must not break installation.
"""

import os
import sys

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("PCAM_SKIP_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        extensions = [
            Extension(
                "pcam.backend._kernels",
                ["src/pcam/backend/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={"language_level": "3"},
        )
    except ImportError as exc:
        print(f"pcam: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
