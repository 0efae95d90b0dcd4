"""Build script: compiles the optional phase-summation extension.

The package works without the extension (a numpy/fsum fallback is selected
at import); a failed compile therefore only costs speed, not functionality.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "phasefit._phase_kernels",
                ["src/phasefit/_phase_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"phasefit: skipping compiled kernels ({exc}); pure-python fallback will be used")

setup(ext_modules=ext_modules)
