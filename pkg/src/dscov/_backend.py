"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise, or
when ``DSCOV_PURE_PYTHON`` is set to a non-empty value, the numpy
implementation in ``_pykernels`` is used.
"""

import os

from . import _pykernels


def _load_compiled():
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()

if _compiled is not None and not os.environ.get("DSCOV_PURE_PYTHON"):
    kernels = _compiled
    BACKEND = "cython"
else:
    kernels = _pykernels
    BACKEND = "python"


def get_kernels(name=None):
    """Return the kernel module for ``name`` ("cython", "python" or None for
    the active default)."""
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    return ["cython", "python"] if _compiled is not None else ["python"]
