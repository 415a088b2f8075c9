import sys

import numpy as np
from setuptools import Extension, setup

# The compiled kernel is an optimization, not a requirement: if Cython or a C
# compiler is missing, install the pure-Python package (adamlab._backend falls
# back transparently at import).
ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "adamlab._kernels",
                ["src/adamlab/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # -ffp-contract=off keeps FMA contraction disabled so the C
                # loop is bit-identical to the pure-Python mirror.
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except Exception as exc:  # pragma: no cover
    print(f"adamlab: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
