import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

np_dir = os.path.dirname(np.__file__)

ext = Extension(
    "bpspt._core",
    ["src/bpspt/_core.pyx"],
    include_dirs=[np.get_include()],
    library_dirs=[os.path.join(np_dir, "random", "lib"), os.path.join(np_dir, "_core", "lib")],
    libraries=["npyrandom", "npymath"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    # no fused multiply-add, so the arithmetic matches the Python engine
    extra_compile_args=["-O3", "-ffp-contract=off"],
)

setup(ext_modules=cythonize([ext], language_level=3))
