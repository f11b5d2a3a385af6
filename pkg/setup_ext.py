"""Build the optional compiled scoring core in place.

    python setup_ext.py build_ext --inplace

Produces permsig/_accel/_fastkern.*.so next to its .pyx source under src/.
The package works without it (pure-numpy fallback); when present it is
picked up automatically at import. Requires Cython and a C compiler.
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "permsig._accel._fastkern",
    sources=["src/permsig/_accel/_fastkern.pyx"],
    include_dirs=[numpy.get_include()],
    # built in place on the host machine, so native tuning is safe
    extra_compile_args=["-O3", "-march=native", "-funroll-loops"],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(
    name="permsig-fastkern",
    package_dir={"": "src"},
    packages=["permsig", "permsig._accel"],
    ext_modules=cythonize([ext], language_level="3"),
)
