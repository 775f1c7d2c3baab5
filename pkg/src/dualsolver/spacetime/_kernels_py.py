"""Pure numpy element kernels; reference implementation for ``_kernels.pyx``.

Shapes: ``ops (nq, 3, 4)`` shape-function operators (d/dt, d/dx, value),
``w (nq,)`` quadrature weights, ``De (nel, 4, ns)`` element nodal values.
"""
import numpy as np

BACKEND = "python"


def interpolate(ops, De):
    """Pointwise (dD/dt, dD/dx, D): (nel, nq, 3, ns)."""
    return np.einsum("qka,eas->eqks", ops, De)


def element_gradient(ops, w, dL):
    """(nel, 4, ns) from pointwise dL/dD arrays (nel, nq, 3, ns)."""
    return np.einsum("q,qka,eqks->eas", w, ops, dL)


def element_hessian(ops, w, Hp):
    """(nel, 4*ns, 4*ns) from pointwise Hessians (nel, nq, 3*ns, 3*ns)."""
    nel, nq = Hp.shape[:2]
    ns = Hp.shape[2] // 3
    H6 = Hp.reshape(nel, nq, 3, ns, 3, ns)
    left = np.einsum("q,qka->qka", w, ops)
    out = np.einsum("qka,eqksmt,qmb->easbt", left, H6, ops, optimize=True)
    return out.reshape(nel, 4 * ns, 4 * ns)


def scatter_add(dofmap, values, ndof):
    return np.bincount(dofmap.ravel(), weights=values.ravel(), minlength=ndof)
