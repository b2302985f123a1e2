"""Build script: compiles the optional raster kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so any failure here degrades to the pure-Python build rather
than aborting the install.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy as np

    ext = Extension(
        "physparts.kernels._raster",
        ["src/physparts/kernels/_raster.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], language_level=3)
except ImportError:
    pass

setup(ext_modules=ext_modules)
