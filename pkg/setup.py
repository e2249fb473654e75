"""Build script: compiles the optional Cython kernel extension.

The package is fully functional without the extension (a pure numpy
fallback is selected at import time), so compilation failures are
downgraded to a warning.  Set CITETREND_NO_EXTENSION=1 to skip the
extension entirely.
"""

import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.extension import Extension


class optional_build_ext(build_ext):
    """build_ext that warns instead of failing when compilation breaks."""

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
        print(
            f"WARNING: building the citetrend._ckernels extension failed ({exc}); "
            "falling back to the pure-Python kernels.",
            file=sys.stderr,
        )


def extensions():
    if os.environ.get("CITETREND_NO_EXTENSION") == "1":
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("WARNING: Cython not available; skipping compiled kernels.", file=sys.stderr)
        return []
    ext = Extension("citetrend._ckernels", sources=["src/citetrend/_ckernels.pyx"])
    return cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
