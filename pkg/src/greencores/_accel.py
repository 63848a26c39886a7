"""Numba switch.

Set ``GREENCORES_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy
path. The flag is read once at import time.
"""
import os

_DISABLED = os.environ.get("GREENCORES_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    _njit = None
    HAS_NUMBA = False


def njit(fn):
    """``numba.njit(nogil=True)`` when available, the plain function otherwise."""
    if HAS_NUMBA:
        return _njit(nogil=True)(fn)
    return fn
