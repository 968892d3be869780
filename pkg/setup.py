import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "semloop._kernels",
                ["src/semloop/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython at build time: install as pure python, the numpy fallback
    # in semloop._kernels_py takes over at import.
    extensions = []

setup(ext_modules=extensions)
