"""Build script for the optional compiled kernel core.

The extension accelerates the fused eval-mode MLP forward used by the
planner. If Cython or a C compiler is unavailable the build degrades to
the pure-numpy backend (pompc._core.kernels_np) selected at import time.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the Cython core if possible; fall back to pure Python."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(f"WARNING: compiled kernel core skipped ({exc}); "
              "pompc will use the pure-numpy backend.")


def extensions():
    if os.environ.get("POMPC_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError as exc:
        print(f"WARNING: {exc}; building without the compiled kernel core.")
        return []
    ext = Extension(
        "pompc._core.kernels_cy",
        ["src/pompc/_core/kernels_cy.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
