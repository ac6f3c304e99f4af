"""Kernel selection at import time.

The compiled kernel is used when it was built; ``LEVYSCALE_BACKEND=python``
forces the numpy fallback.
"""
import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

KERNELS = {"python": _pykernels}
if _ckernels is not None:
    KERNELS["cython"] = _ckernels

_requested = os.environ.get("LEVYSCALE_BACKEND", "").strip().lower()
if _requested and _requested not in ("python", "cython"):
    raise ImportError(f"LEVYSCALE_BACKEND must be 'python' or 'cython', got {_requested!r}")
if _requested == "cython" and _ckernels is None:
    raise ImportError("LEVYSCALE_BACKEND=cython but the compiled kernel is not built")

BACKEND = _requested or ("cython" if _ckernels is not None else "python")


def kernel(name=None):
    """The kernel module for ``name`` (default: the import-time choice)."""
    name = name or BACKEND
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(KERNELS)}") from None
