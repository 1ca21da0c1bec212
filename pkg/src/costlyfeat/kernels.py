"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``COSTLYFEAT_PURE_PYTHON=1`` to force the fallback.
"""
import importlib
import os

from . import _pykernels

BACKENDS = ("cython", "python")


def load_backend(name):
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("costlyfeat._ckernels")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    out = ["python"]
    try:
        load_backend("cython")
    except ImportError:
        pass
    else:
        out.insert(0, "cython")
    return out


if os.environ.get("COSTLYFEAT_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        _impl = load_backend("cython")
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

forward_single = _impl.forward_single
masked_softmax = _impl.masked_softmax
puct_select = _impl.puct_select
update_edge = _impl.update_edge
