"""Numba switch.

Hot kernels are written in the numba-compatible subset of Python and
decorated with :func:`njit` from this module.  Setting the environment
variable ``OCTWALK_NO_NUMBA=1`` (or running without numba installed) makes
the decorator a no-op, so the same functions run as plain Python/numpy.
The counting kernel additionally has a vectorised numpy implementation that
is selected under the same flag.
"""

import os

_DISABLED = os.environ.get("OCTWALK_NO_NUMBA", "").strip() not in ("", "0")

try:
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

USE_NUMBA = _numba is not None and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` with on-disk caching, or identity when disabled."""
    if USE_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


if USE_NUMBA:
    prange = _numba.prange
else:
    prange = range


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
