"""CMake-driven extension build: the canonical build system stays CMake; this
shim configures a dedicated build tree with the pybind11 module enabled and
drops the resulting _core library into the package."""

import shutil
import subprocess
import sys
from pathlib import Path

import pybind11
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source = Path(__file__).resolve().parent
        build = Path(self.build_temp).resolve() / "cmake"
        build.mkdir(parents=True, exist_ok=True)
        subprocess.run(
            [
                "cmake",
                "-S", str(source),
                "-B", str(build),
                "-DCMAKE_BUILD_TYPE=Release",
                "-DDSAM_BUILD_PYTHON=ON",
                "-DDSAM_BUILD_TESTS=OFF",
                f"-Dpybind11_DIR={pybind11.get_cmake_dir()}",
                f"-DPython_EXECUTABLE={sys.executable}",
            ],
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", str(build), "--target", "_core", "-j"], check=True
        )
        produced = next((build / "python").glob("_core*.so"))
        out = Path(self.get_ext_fullpath(ext.name))
        out.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(produced, out)


setup(
    ext_modules=[CMakeExtension("dsam._core")],
    cmdclass={"build_ext": CMakeBuild},
)
