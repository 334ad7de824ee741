"""Optional numba acceleration.

Set ``SOSDECODER_DISABLE_NUMBA=1`` before import to force the pure-numpy
kernels (useful for debugging and for the benchmark comparison).
"""

import os

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("SOSDECODER_DISABLE_NUMBA", "0") not in ("1", "true", "yes")


def optional_njit(*args, **kwargs):
    """``numba.njit`` when acceleration is enabled, identity otherwise."""

    def decorator(func):
        if USE_NUMBA:
            return _njit(*args, **kwargs)(func)
        return func

    return decorator
