from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-python install, numpy fallback is used
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "fsru._ckernels",
                ["src/fsru/_ckernels.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
