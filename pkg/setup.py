import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("BOLALAB_NO_EXTENSION"):
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:  # build the pure-Python package only
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "bolalab.oracle._kernel",
                    ["src/bolalab/oracle/_kernel.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
