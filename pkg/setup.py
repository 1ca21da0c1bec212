import os

from setuptools import Extension, setup


def build_ext_modules():
    if os.environ.get("COSTLYFEAT_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except Exception:
        return []
    ext = Extension(
        name="costlyfeat._ckernels",
        sources=[os.path.join("src", "costlyfeat", "_ckernels.pyx")],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=build_ext_modules())
