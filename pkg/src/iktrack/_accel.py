"""Optional numba acceleration for the hot kernels.

Kernels import ``njit`` from here. With numba installed the decorator is the
real ``numba.njit``; setting ``IKTRACK_NO_NUMBA=1`` (or running without numba)
turns it into a no-op so the same functions execute as plain numpy/Python.
The flag is read once at import time.
"""
import os


def _disabled() -> bool:
    return os.environ.get("IKTRACK_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


NUMBA_ENABLED = False
if not _disabled():
    try:
        from numba import njit  # noqa: F401
        NUMBA_ENABLED = True
    except ImportError:
        pass

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
