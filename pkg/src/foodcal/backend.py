"""Kernel backend selection.

Hot numeric kernels ship in two variants: an explicit-loop version compiled
with numba's ``@njit`` and a pure-NumPy fallback. The environment variable
``FOODCAL_NUMBA`` picks the path (default: numba when importable). Set
``FOODCAL_NUMBA=0`` to force the NumPy fallback; ``python -m foodcal.benchmark``
times both paths side by side.
"""

import os

_OFF = {"0", "false", "off", "no"}

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and os.environ.get("FOODCAL_NUMBA", "1").lower() not in _OFF


def compile_kernel(fn):
    """Return ``fn`` compiled with numba, or None when numba is unavailable.

    Compilation is lazy (first call), and cached on disk so repeated runs
    skip the JIT cost. ``fastmath`` stays off: kernels must produce the same
    IEEE-754 results as their NumPy fallbacks.
    """
    if not HAVE_NUMBA:
        return None
    return _njit(cache=True)(fn)


def pick(numba_fn, numpy_fn):
    """Dispatch to the compiled kernel unless disabled by FOODCAL_NUMBA."""
    if NUMBA_ENABLED and numba_fn is not None:
        return numba_fn
    return numpy_fn
