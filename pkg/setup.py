import numpy as np
from Cython.Build import cythonize
from setuptools import setup

setup(
    ext_modules=cythonize(
        ["src/sleeploop/kernels/_compiled.pyx"],
        compiler_directives={"language_level": 3, "boundscheck": False, "wraparound": False},
    ),
    include_dirs=[np.get_include()],
)
