import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [Extension("corrl._kernels", ["src/corrl/_kernels.pyx"], include_dirs=[np.get_include()])],
        compiler_directives={"language_level": "3"},
    )
else:
    # the package falls back to numpy kernels at import
    ext_modules = []

setup(ext_modules=ext_modules)
