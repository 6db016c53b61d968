# Builds the optional compiled kernel extension. The package works without it
# (a numpy fallback is selected at import), so a missing Cython/compiler is
# tolerated rather than fatal.
from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy as np
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "etmpc._kernels",
                sources=["src/etmpc/_kernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except Exception:
    ext_modules = []

setup(ext_modules=ext_modules)
