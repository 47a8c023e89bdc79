"""JIT switch for the hot kernels.

Set ``TAILGIBBS_DISABLE_JIT=1`` to run every kernel as plain Python/numpy.
Both paths consume ``numpy.random.Generator`` streams identically, so a run
with a given seed produces the same draws either way (up to libm rounding).
"""

import os

_flag = os.environ.get("TAILGIBBS_DISABLE_JIT", "").strip().lower()
USE_JIT = _flag not in ("1", "true", "yes", "on")

if USE_JIT:
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a hard dependency
        USE_JIT = False

if USE_JIT:

    def jit(func):
        return numba.njit(cache=True, nogil=True)(func)

else:

    def jit(func):
        return func


__all__ = ["USE_JIT", "jit"]
