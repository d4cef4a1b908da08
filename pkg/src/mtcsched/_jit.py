"""numba switch: set MTCSCHED_DISABLE_NUMBA=1 to run kernels as plain Python/numpy."""

import functools
import os

DISABLED = os.environ.get("MTCSCHED_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_ACTIVE = numba is not None and not DISABLED


def _identity(*args, **kwargs):
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


if NUMBA_ACTIVE:
    njit = functools.partial(numba.njit, cache=True, nogil=True)
else:
    njit = _identity
