import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install, fallback kernels only
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("HOPFIELD_MF_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "hopfield_mf._core",
                ["src/hopfield_mf/_core.pyx"],
                include_dirs=[np.get_include()],
                # no FMA contraction: keeps compiled and numpy kernels in step
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
