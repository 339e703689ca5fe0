"""Optional numba acceleration.

Kernels are written once as plain Python over numpy arrays and compiled with
:func:`njit` when numba is importable.  Setting ``LRTDVC_DISABLE_JIT=1`` keeps
the interpreted versions, which is useful for debugging and for checking the
compiled path against the reference one.
"""

import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("LRTDVC_DISABLE_JIT", "").strip().lower() in ("1", "true", "yes", "on")

NUMBA_ENABLED = numba is not None and not _DISABLED


def njit(func):
    """Compile ``func`` in nopython mode, or return it untouched when disabled."""
    if not NUMBA_ENABLED:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def py_func(kernel):
    """The interpreted body of a kernel, whichever way it was built."""
    return getattr(kernel, "py_func", kernel)
