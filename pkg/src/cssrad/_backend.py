"""Backend selection for the hot kernels.

Set ``CSSRAD_DISABLE_NUMBA=1`` to force the pure numpy/scipy path. When numba
is missing the fallback is used automatically. ``CSSRAD_NUM_THREADS`` caps the
numba thread pool.
"""

import os

_FALSEY = {"", "0", "false", "no", "off"}


def _flag(name):
    return os.environ.get(name, "").strip().lower() not in _FALSEY


try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

USE_NUMBA = _numba is not None and not _flag("CSSRAD_DISABLE_NUMBA")

if USE_NUMBA:
    njit = _numba.njit
    _threads = os.environ.get("CSSRAD_NUM_THREADS")
    if _threads:
        _numba.set_num_threads(max(1, min(int(_threads), _numba.config.NUMBA_NUM_THREADS)))
else:

    def njit(*args, **kwargs):
        """No-op stand-in so decorated kernels still import without numba."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrapper(f):
            return f

        return wrapper


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
