"""Numba compatibility layer.

Hot recursions are written once, in plain numpy-compatible Python, and
compiled with numba's ``njit`` when available. Setting the environment
variable ``DYSARAR_DISABLE_NUMBA=1`` (before import) selects the pure-numpy
fallback path, which executes the identical source uncompiled.
"""

import os

DISABLE_NUMBA = os.environ.get("DYSARAR_DISABLE_NUMBA", "0") in ("1", "true", "True")

try:
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency, but the
    HAS_NUMBA = False  # fallback keeps the package importable without it

USE_NUMBA = HAS_NUMBA and not DISABLE_NUMBA


def jit(func):
    """Compile ``func`` in nopython mode, or return it unchanged."""
    if USE_NUMBA:
        return _njit(func, cache=True)
    return func


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
