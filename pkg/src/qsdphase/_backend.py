"""Kernel backend selection.

Set ``QSDPHASE_DISABLE_NUMBA=1`` to force the pure-numpy kernels.  The flag is
read once at import time; numba is also skipped when it is not installed.
"""

import os

_FLAG = os.environ.get("QSDPHASE_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False
    _njit = None

BACKEND = "numba" if HAVE_NUMBA else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
