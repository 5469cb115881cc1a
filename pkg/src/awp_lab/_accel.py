"""Optional numba acceleration.

Hot loops are written once as plain Python over numpy arrays.  When numba is
importable (and not disabled with ``AWP_LAB_DISABLE_NUMBA=1``) they are compiled
with ``njit``; otherwise callers fall back to the vectorized numpy versions
that live next to each kernel.
"""

from __future__ import annotations

import os

_DISABLED = os.environ.get("AWP_LAB_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by AWP_LAB_DISABLE_NUMBA")
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag in a subprocess test
    _njit = None
    HAS_NUMBA = False


def maybe_njit(func):
    """Compile ``func`` with numba when available, else return ``None``.

    Returning ``None`` lets call sites pick their numpy fallback explicitly
    instead of silently running an uncompiled scalar loop.
    """
    if not HAS_NUMBA:
        return None
    return _njit(cache=True, fastmath=False)(func)


def backend() -> str:
    """Name of the active backend for hot loops (``"numba"`` or ``"numpy"``)."""
    return "numba" if HAS_NUMBA else "numpy"
