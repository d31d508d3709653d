"""JIT switch for the hot kernels.

Kernels are written in the numba-compatible subset of Python. When numba is
missing, or ``TAGSCOPE_DISABLE_NUMBA`` is set to a truthy value, ``njit``
returns the function unchanged and the pure numpy/Python path runs instead.
"""

import os

_FLAG = os.environ.get("TAGSCOPE_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA = _numba is not None and not DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is on, identity decorator otherwise."""
    if USE_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def jit_compile(fn, **kwargs):
    """Compile ``fn`` regardless of the env flag (used by the benchmark)."""
    if _numba is None:
        raise RuntimeError("numba is not installed")
    kwargs.setdefault("cache", True)
    return _numba.njit(**kwargs)(fn)
