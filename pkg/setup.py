"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import); the extension only accelerates path enumeration and
backward sampling.  -ffp-contract=off keeps the compiled search arithmetic
identical to the fallback's.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:  # plain source install without build deps: pure Python only
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "histlaw._kernels._compiled",
                ["src/histlaw/_kernels/_compiled.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
