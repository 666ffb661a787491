"""Build the optional compiled kernels.

Metadata lives in pyproject.toml.  When Cython or a compiler is missing the
package still installs and runs on the numpy fallback.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("BLAB_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "blab.kernels._ckernels",
                    ["src/blab/kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        print("Cython not available; building without compiled kernels")

setup(ext_modules=ext_modules)
