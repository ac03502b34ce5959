import os

from setuptools import setup

ext_modules = []
if os.environ.get("MARTENSITE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("martensite._kernels", ["src/martensite/_kernels.pyx"],
                       include_dirs=[numpy.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                       extra_compile_args=["-O3"])],
            language_level=3,
        )
    except ImportError:
        # no Cython: the NumPy fallback in _kernels_py is used at import
        ext_modules = []

setup(ext_modules=ext_modules)
