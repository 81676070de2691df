import numpy
from setuptools import Extension, setup
from Cython.Build import cythonize

# -ffp-contract=off keeps the compiled kernel bit-for-bit identical to the
# numpy fallback (no FMA contraction of a*b+c).
extensions = [
    Extension(
        "msde_ldp.kernels._core",
        ["src/msde_ldp/kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O2", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
