"""Kernel acceleration backend selection.

Hot numerical loops are written once in a numba-compatible style and
decorated with :func:`maybe_njit`.  By default they are JIT-compiled with
numba; setting the environment variable ``COVGGM_NUMBA`` to ``0``, ``false``
or ``off`` (or running without numba installed) selects the plain
numpy/Python fallback, which executes the identical code path without
compilation.  The flag is read once at import time.
"""

from __future__ import annotations

import os

__all__ = ["maybe_njit", "USING_NUMBA", "BACKEND"]


def _numba_requested() -> bool:
    value = os.environ.get("COVGGM_NUMBA", "1").strip().lower()
    return value not in ("0", "false", "off", "no")


USING_NUMBA = False

if _numba_requested():
    try:
        from numba import njit as _njit

        USING_NUMBA = True
    except ImportError:
        USING_NUMBA = False

if USING_NUMBA:

    def maybe_njit(*args, **kwargs):
        return _njit(*args, **kwargs)

else:

    def maybe_njit(*args, **kwargs):
        # Identity decorator: the same function body runs as plain Python.
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


BACKEND = "numba" if USING_NUMBA else "numpy"
