"""Optional numba acceleration.

Hot kernels are written once in numba-compatible Python and decorated with
:func:`njit` from this module. When numba is importable and the environment
variable ``CHAZYLAB_NUMBA`` is not set to ``0``, the kernels are compiled;
otherwise the decorator is the identity and the same code runs on plain
numpy/cmath.
"""

import os
import types

_flag = os.environ.get("CHAZYLAB_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - exercised only without numba
    _numba = None

NUMBA_ENABLED = bool(_requested and _numba is not None)


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is on, identity otherwise."""
    if NUMBA_ENABLED:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def python_version(func, **overrides):
    """The uncompiled implementation behind a kernel.

    Keyword arguments replace globals seen by the returned function, which
    lets a kernel run with plain-Python collaborators.
    """
    py = getattr(func, "py_func", func)
    if not overrides:
        return py
    env = dict(py.__globals__)
    env.update(overrides)
    return types.FunctionType(py.__code__, env, py.__name__, py.__defaults__,
                              py.__closure__)
