import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

# Compiled hot kernels (soft demapper + forward-backward pass). The package
# falls back to the numpy implementations in mimolink._kernels_py when the
# extension is unavailable, so a failed build is not fatal to correctness.
extensions = [
    Extension(
        "mimolink._kernels",
        ["src/mimolink/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
