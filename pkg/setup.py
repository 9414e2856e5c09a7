"""Build script: compiles the optional Cython oracle kernel.

The package works without the extension (a numpy fallback is selected at
import time), so compilation failures downgrade to a warning instead of
failing the install. Set QFREQ_NO_EXT=1 to skip the build entirely.
"""
import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Swallow compiler failures; the pure-numpy backend takes over."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure is non-fatal
            print(f"warning: skipping qfreq._oracle_core build ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: {ext.name} failed to compile ({exc}); "
                  "falling back to the numpy kernels", file=sys.stderr)


ext_modules = []
cmdclass = {}
if not os.environ.get("QFREQ_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "qfreq._oracle_core",
                    ["src/qfreq/_oracle_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    # -ffp-contract=off keeps results bit-identical to the
                    # numpy fallback (no FMA re-association).
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
        cmdclass = {"build_ext": optional_build_ext}
    except ImportError as exc:
        print(f"warning: Cython/numpy unavailable ({exc}); building without the "
              "compiled kernels", file=sys.stderr)

setup(ext_modules=ext_modules, cmdclass=cmdclass)
