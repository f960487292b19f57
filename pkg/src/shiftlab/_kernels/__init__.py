"""Kernel backend selection.

The hot inner loops (dense matmul, pairwise squared distances) exist twice:
a Cython extension (``_core``) and a numpy fallback (``numpy_backend``) with
bit-identical semantics.  The compiled core is preferred when importable;
set ``SHIFTLAB_BACKEND=numpy`` or ``SHIFTLAB_BACKEND=compiled`` to force one.

Everything above these two primitives (activations, losses, reductions) is
shared Python/numpy code, so switching backends never changes results.
"""

import os

from . import numpy_backend

try:
    from . import _core
except ImportError:
    _core = None

_BACKENDS = {"numpy": numpy_backend}
if _core is not None:
    _BACKENDS["compiled"] = _core


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend(name: str):
    """Return the kernel module for `name` ('compiled' or 'numpy')."""
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"unknown kernel backend {name!r}; available: {', '.join(available_backends())}"
        ) from None


def _select_default():
    forced = os.environ.get("SHIFTLAB_BACKEND")
    if forced:
        return forced, get_backend(forced)
    if _core is not None:
        return "compiled", _core
    return "numpy", numpy_backend


BACKEND_NAME, _active = _select_default()

matmul = _active.matmul
pairwise_sqdist = _active.pairwise_sqdist
