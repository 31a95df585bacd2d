"""Hot numeric kernels for local training and evaluation.

Two interchangeable backends exist: numba-compiled loops (default) and a
vectorized pure-numpy path. Set ``COSTFL_DISABLE_NUMBA=1`` to force numpy;
the numba path is also skipped automatically when numba cannot be imported.
"""

from __future__ import annotations

import os

from . import _numpy

_FLAG = "COSTFL_DISABLE_NUMBA"


def _numba_wanted() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() not in {"1", "true", "yes", "on"}


_jit = None
if _numba_wanted():
    try:
        from . import _numba as _jit
    except ImportError:  # pragma: no cover - numba is an optional speedup
        _jit = None

BACKEND = "numba" if _jit is not None else "numpy"


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ("numba", "numpy") or the active one."""
    if name is None:
        name = BACKEND
    if name == "numpy":
        return _numpy
    if name == "numba":
        if _jit is None:
            from . import _numba as mod  # raises ImportError if unavailable

            return mod
        return _jit
    raise ValueError(f"unknown kernel backend {name!r}")


def forward(params, X, y, num_classes, hidden):
    return get_backend().forward(params, X, y, num_classes, hidden)


def batch_grad(params, X, y, num_classes, hidden):
    return get_backend().batch_grad(params, X, y, num_classes, hidden)


def sgd_epochs(params, X, y, order, lr, batch_size, num_classes, hidden):
    return get_backend().sgd_epochs(params, X, y, order, lr, batch_size, num_classes, hidden)


__all__ = ["BACKEND", "get_backend", "forward", "batch_grad", "sgd_epochs"]
