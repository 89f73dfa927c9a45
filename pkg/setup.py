import os

from setuptools import setup

ext_modules = []
if not os.environ.get("RIL_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:  # fallback kernels are used at runtime
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "ril._kernels",
                    ["src/ril/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
