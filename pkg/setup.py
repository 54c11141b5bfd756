import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    # -ffp-contract=off keeps the compiled kernels bit-identical to the
    # numpy fallback (no fused multiply-adds changing the rounding).
    extensions = cythonize(
        [
            Extension(
                "spd._kernels._ext",
                ["src/spd/_kernels/_ext.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
