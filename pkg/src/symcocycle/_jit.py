"""Optional numba acceleration.

Hot kernels are written once as plain Python and compiled with numba when it
is importable.  Setting SYMCOCYCLE_DISABLE_JIT=1 selects the pure-numpy code
paths instead; the choice is read at call time so tests can flip it.
"""
import os

try:
    import numba
except ModuleNotFoundError:
    numba = None

DISABLE_ENV = "SYMCOCYCLE_DISABLE_JIT"


def jit_available():
    return numba is not None


def jit_enabled():
    if numba is None:
        return False
    return os.environ.get(DISABLE_ENV, "").strip().lower() not in ("1", "true", "yes", "on")


def numba_jit(f=None, **setting):
    setting.setdefault("cache", True)
    if numba is None:
        if f is None:
            return lambda g: g
        return f
    if f is None:
        return lambda g: numba.njit(g, **setting)
    return numba.njit(f, **setting)
