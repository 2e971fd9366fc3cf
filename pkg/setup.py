import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; marl_ngu.kernels falls back
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("MARL_NGU_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "marl_ngu._kernels",
                ["src/marl_ngu/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # no FMA contraction: results must match the Python fallback bit for bit
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
