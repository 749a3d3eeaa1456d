from setuptools import Extension, setup

# The compiled kernel is optional: if Cython (or a C compiler) is missing the
# package installs anyway and falls back to the pure-Python implementations.
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "mapcascade._kernel",
                ["src/mapcascade/_kernel.pyx"],
                # FMA contraction must stay off: the compiled kernels promise
                # bit-identical floating-point results to the pure-Python
                # fallback, and fused multiply-adds would change rounding.
                extra_compile_args=["-O3", "-ffp-contract=off"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
