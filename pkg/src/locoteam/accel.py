"""Numba acceleration switch.

Hot numeric kernels in this package are written as plain numpy functions and
decorated with :func:`njit`. By default they are JIT-compiled with numba
(``cache=True, nogil=True``); setting the environment variable
``LOCOTEAM_DISABLE_NUMBA=1`` (or numba being unimportable) selects the pure
numpy/Python fallback path, where :func:`njit` is a no-op and every kernel
runs as the interpreted function. Both paths execute the same source.

``benchmarks/kernel_benchmark.py`` compares the two paths.
"""

import os

_DISABLED = os.environ.get("LOCOTEAM_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)

NUMBA_ENABLED = False

if not _DISABLED:
    try:
        import numba as _numba

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - exercised via env flag instead
        NUMBA_ENABLED = False


def njit(*args, **kwargs):
    """Conditional ``numba.njit``: identity decorator when acceleration is off."""
    if NUMBA_ENABLED:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return _numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]

    def wrap(func):
        return func

    return wrap


def python_impl(func):
    """Return the uncompiled Python implementation of a kernel."""
    return getattr(func, "py_func", func)
