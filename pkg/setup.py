"""Build script: compiles the optional assignment-solver extension.

The extension is a pure speedup; if the build fails (no compiler, no
Cython) the package still installs and falls back to the numpy solver.
"""

import numpy
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler etc.
            print(f"warning: skipping C extension build ({exc!r}); "
                  "ralab will use the pure-numpy assignment solver")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc!r}); "
                  "ralab will use the pure-numpy assignment solver")


try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "ralab._assign_c",
                ["src/ralab/_assign_c.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions, cmdclass={"build_ext": OptionalBuildExt})
