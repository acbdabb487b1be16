"""Optional numba compilation.

Set ``MBSALLOC_DISABLE_NUMBA=1`` to run every kernel as plain Python. The
kernels are written in the subset numba compiles, so both paths execute
the same source.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

DISABLED = os.environ.get("MBSALLOC_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")
USE_NUMBA = numba is not None and not DISABLED


def njit(fn=None, **options):
    """``numba.njit(cache=True, nogil=True)`` or the identity decorator."""
    def wrap(f):
        if not USE_NUMBA:
            return f
        return numba.njit(cache=True, nogil=True, **options)(f)
    return wrap(fn) if fn is not None else wrap


def backend_name() -> str:
    return "numba" if USE_NUMBA else "python"
