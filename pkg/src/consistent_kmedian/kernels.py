"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``CONSISTENT_KMEDIAN_PURE=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"

if not os.environ.get("CONSISTENT_KMEDIAN_PURE"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

SiteHeaps = _impl.SiteHeaps
first_separated_pair = _impl.first_separated_pair
exact_kmedian_kernel = _impl.exact_kmedian

__all__ = ["BACKEND", "SiteHeaps", "first_separated_pair", "exact_kmedian_kernel"]
