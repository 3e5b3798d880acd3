import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "pervisor.surf._kernels",
                ["src/pervisor/surf/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # No FMA contraction: results must match the numpy kernel bit-for-bit.
                extra_compile_args=["-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython: install with the pure-numpy kernel only.
    ext_modules = []

setup(ext_modules=ext_modules)
