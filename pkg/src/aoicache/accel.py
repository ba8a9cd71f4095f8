"""Optional numba acceleration for the hot simulation kernel.

The jitted and plain paths run the identical Python source, so results are
bit-for-bit equal either way.  Set AOICACHE_PURE_PYTHON=1 to force the plain
path (useful for debugging, or on hosts without numba).
"""

import os


def _want_jit() -> bool:
    flag = os.environ.get("AOICACHE_PURE_PYTHON", "").strip().lower()
    if flag in {"1", "true", "yes", "on"}:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USING_NUMBA = _want_jit()


def maybe_njit(func=None, **kwargs):
    """numba.njit when acceleration is enabled, identity otherwise."""

    def wrap(f):
        if not USING_NUMBA:
            return f
        import numba

        return numba.njit(**kwargs)(f)

    if func is None:
        return wrap
    return wrap(func)
