"""Select the numba or pure-numpy kernel path.

Set ``SPECSHAPE_NO_NUMBA=1`` to force the fallback even when numba imports.
"""

import os

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None

HAVE_NUMBA = njit is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("SPECSHAPE_NO_NUMBA", "").lower() not in ("1", "true", "yes")


def identity(fn=None, **_):
    if fn is None:
        return lambda f: f
    return fn


def jit(fn=None, **kw):
    if not HAVE_NUMBA:
        return identity(fn)
    kw.setdefault("cache", True)
    if fn is None:
        return njit(**kw)
    return njit(**kw)(fn)
