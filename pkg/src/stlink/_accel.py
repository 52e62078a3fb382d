"""Optional numba acceleration.

Kernels are written twice: a scalar-loop version compiled with ``numba.njit``
and a vectorized numpy version. Setting ``STLINK_DISABLE_NUMBA=1`` (or running
without numba installed) selects the numpy path everywhere.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FLAG = os.environ.get("STLINK_DISABLE_NUMBA", "").strip().lower()

NUMBA_AVAILABLE = numba is not None
NUMBA_ENABLED = NUMBA_AVAILABLE and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """Compile ``fn`` with numba when available, else return it unchanged."""
    if not NUMBA_AVAILABLE:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


def select(numba_impl, numpy_impl):
    return numba_impl if NUMBA_ENABLED else numpy_impl
