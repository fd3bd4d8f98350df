"""Build script for the optional compiled kernels.

The package is fully functional without the extension; ``thermorichards.kernels``
falls back to a pure-numpy implementation when the compiled module is absent
(or when THERMORICHARDS_PURE_PYTHON=1 is set).
"""
import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "thermorichards.kernels._core",
        ["src/thermorichards/kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
