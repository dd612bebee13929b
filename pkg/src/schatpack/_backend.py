"""Kernel backend selection.

Hot loops are written once in numba-compatible numpy style and compiled with
``@njit`` by default. Setting the environment variable ``SCHATPACK_BACKEND``
to ``numpy`` (checked at import time) skips compilation so the same source
runs as plain vectorized numpy. Anything else, or an unavailable numba,
falls back the same way.
"""

from __future__ import annotations

import os

__all__ = ["BACKEND", "kernel"]


def _resolve_backend() -> str:
    requested = os.environ.get("SCHATPACK_BACKEND", "numba").strip().lower()
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


BACKEND = _resolve_backend()


if BACKEND == "numba":
    from numba import njit

    def kernel(func):
        """Compile a hot-loop function, or return it untouched on the numpy path."""
        return njit(cache=True)(func)

else:

    def kernel(func):
        return func
