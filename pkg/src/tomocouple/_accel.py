"""Backend switch for the hot loops.

Set ``TOMOCOUPLE_BACKEND=numpy`` to bypass numba and run the vectorised
numpy kernels instead. Any other value (or unset) selects numba when it can
be imported.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

BACKEND = os.environ.get("TOMOCOUPLE_BACKEND", "numba").strip().lower()
USE_NUMBA = HAVE_NUMBA and BACKEND != "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` with on-disk caching; identity decorator without numba."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
