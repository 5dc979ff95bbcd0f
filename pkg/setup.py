"""Build script: compiles the sparse-factorization kernels when Cython and a C
compiler are available.  The package imports fine without the extension (a
pure-Python implementation of the same kernels is selected at import time),
so the extension is declared optional."""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "lapgm._chol_c",
        sources=["src/lapgm/_chol_c.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        optional=True,
    )
    ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})
except ImportError:
    pass

setup(ext_modules=ext_modules)
