"""JIT switch.

Set ``PANEL_EPA_DISABLE_JIT=1`` before import to run every hot kernel through
its pure-numpy path instead of the numba one.
"""
import os

_flag = os.environ.get("PANEL_EPA_DISABLE_JIT", "").strip().lower()
JIT_DISABLED = _flag in ("1", "true", "yes", "on")

try:
    import numba as nb
except ImportError:  # pragma: no cover
    nb = None

HAVE_NUMBA = nb is not None
USE_JIT = HAVE_NUMBA and not JIT_DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        return nb.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func
