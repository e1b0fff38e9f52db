"""Kernel backend selection.

Hot loops are written once as plain Python/numpy and compiled with numba's
``njit`` when it is available. Set ``ATTNBENCH_NUMBA=0`` to force the pure
numpy fallbacks (useful for debugging and for the backend benchmark).
"""

import os

_FLAG = os.environ.get("ATTNBENCH_NUMBA", "1").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA = _numba is not None and _FLAG not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` if available, identity decorator otherwise."""
    if _numba is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    kwargs.setdefault("cache", True)
    return _numba.njit(*args, **kwargs)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
