from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; ixtrace.lpm falls back to _lpm_py
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("ixtrace._lpm", ["src/ixtrace/_lpm.pyx"], extra_compile_args=["-O3"], optional=True)],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
