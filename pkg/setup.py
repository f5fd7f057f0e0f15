"""Builds the optional compiled codec core.

The package is fully functional without the extension: bagpipe.codec falls
back to the pure-Python kernels when bagpipe.codec._native is missing or
when BAGPIPE_PURE_PYTHON=1 is set.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "bagpipe.codec._native",
                ["src/bagpipe/codec/_native.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
