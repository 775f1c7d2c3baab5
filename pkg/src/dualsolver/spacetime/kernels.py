"""Element-kernel backend selection.

The compiled extension is used when importable; set
``DUALSOLVER_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("DUALSOLVER_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _kernels_py

BACKEND = _impl.BACKEND


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def interpolate(ops, De):
    return _impl.interpolate(_c(ops), _c(De))


def element_gradient(ops, w, dL):
    return _impl.element_gradient(_c(ops), _c(w), _c(dL))


def element_hessian(ops, w, Hp):
    return _impl.element_hessian(_c(ops), _c(w), _c(Hp))


def scatter_add(dofmap, values, ndof):
    return _impl.scatter_add(np.ascontiguousarray(dofmap, dtype=np.int64),
                             _c(values.reshape(dofmap.shape)), int(ndof))
