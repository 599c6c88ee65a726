import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# optional: a failed compile leaves the pure-Python kernels in charge
extensions = [
    Extension(
        "pmlep._ckernels",
        ["src/pmlep/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
)
