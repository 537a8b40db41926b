"""Numba toggle.

The hot projection kernels are jitted with numba by default.  Setting the
environment variable ``NCCONVEX_DISABLE_NUMBA`` to a non-empty value other
than ``0`` selects the pure-numpy fallback path (same code, no jit), which
is also what you get when numba is not importable.
"""

import os


def _flag_disabled() -> bool:
    value = os.environ.get("NCCONVEX_DISABLE_NUMBA", "").strip().lower()
    return value not in ("", "0", "false", "no")


NUMBA_ENABLED = False
if not _flag_disabled():
    try:
        from numba import njit as _njit  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False


def maybe_jit(func):
    """Return a jitted copy of ``func`` when numba is active, else ``func``."""
    if NUMBA_ENABLED:
        from numba import njit

        return njit(cache=True)(func)
    return func
