"""Build script: compiles the optional assembly kernel extension.

The extension accelerates the per-time-step finite element assembly. If
Cython or a C compiler is unavailable (or KFLOW_NO_EXT=1 is set), the
package installs without it and falls back to the NumPy implementation
selected at import time in kflow.forward.kernels.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("KFLOW_NO_EXT", "0") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "kflow.forward._assembly",
                    ["src/kflow/forward/_assembly.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": 3},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
