"""JIT compilation shim for the hot numeric kernels.

Every kernel in this package is written as plain numpy code and passed
through :func:`maybe_jit`.  By default the kernels are compiled with
``numba.njit(cache=True)``; setting the environment variable
``GRIDMC_NO_NUMBA=1`` (or any non-empty value other than ``0``) selects the
uncompiled pure-numpy path instead.  Both paths execute the same source, so
results are identical; only speed differs.  ``benchmarks/kernel_bench.py``
compares the two.
"""

import os

__all__ = ["NUMBA_ENABLED", "maybe_jit"]


def _numba_requested() -> bool:
    flag = os.environ.get("GRIDMC_NO_NUMBA", "")
    return flag in ("", "0")


if _numba_requested():
    try:
        import numba

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


def maybe_jit(func=None, **options):
    """Apply ``numba.njit`` unless the pure-numpy fallback is selected."""

    def wrap(f):
        if not NUMBA_ENABLED:
            return f
        options.setdefault("cache", True)
        return numba.njit(**options)(f)

    if func is None:
        return wrap
    return wrap(func)
