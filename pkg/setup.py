"""Build script: compiles the optional edit-distance extension.

The package works without a C toolchain; the pure-Python kernel is used
whenever the extension is missing (see coderag.kernels).
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that degrades to a source-only install on compiler failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing toolchain
            warnings.warn(f"skipping C extension build: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"skipping {ext.name}: {exc}")


try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [Extension("coderag.kernels._lev", ["src/coderag/kernels/_lev.pyx"])],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
        },
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})
