"""Build the optional compiled kernel; the package falls back to numpy without it."""
import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # no compiler or Cython: keep the pure-Python backend
            print(f"warning: compiled kernel not built ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: {ext.name} not built ({exc})")


def extensions():
    if os.environ.get("LEVYSCALE_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    ext = Extension(
        "levyscale._ckernels",
        ["src/levyscale/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        # no contraction into FMA: keep arithmetic identical to the numpy fallback
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
