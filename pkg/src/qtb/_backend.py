"""Select the time-tag kernel implementation at import time.

``QTB_BACKEND=python`` forces the numpy fallback, ``QTB_BACKEND=cython``
makes a missing extension an ImportError; the default prefers the
compiled module and falls back silently.
"""
import importlib
import os

from . import _pykernels

_requested = os.environ.get("QTB_BACKEND", "auto").lower()


def get_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("qtb._ckernels")
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        get_backend("cython")
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


if _requested == "python":
    kernels, BACKEND = _pykernels, "python"
else:
    try:
        kernels, BACKEND = get_backend("cython"), "cython"
    except ImportError:
        if _requested == "cython":
            raise
        kernels, BACKEND = _pykernels, "python"
