"""Dirichlet data through augmentation rows.

For a row ``A_{GIj} dU_I/dx_j - B_{GI} U_I = 0`` the natural condition
``F_{Gj} n_j = B_{Gj} n_j`` with ``B_{Gj} = A_{GIj} y*_I`` reads
``A_{GIj} (U_I - y*_I) n_j = 0``, i.e. Dirichlet data on ``U``.
"""
import numpy as np

from ..errors import NotAugmentationRow


def encode_dirichlet(aug_A, rows, y_star, aug_rows=None):
    """Boundary flux array ``B (N*, d)``; rows not listed are zero.

    ``aug_A`` has shape ``(N*, N, d)``.  ``aug_rows`` defaults to every row with
    a nonzero slice of ``aug_A``.
    """
    A = np.asarray(aug_A, dtype=float)
    y = np.asarray(y_star, dtype=float)
    if aug_rows is None:
        aug_rows = [g for g in range(A.shape[0]) if np.any(A[g])]
    allowed = set(int(g) for g in aug_rows)
    B = np.zeros((A.shape[0], A.shape[2]))
    for g in rows:
        if int(g) not in allowed:
            raise NotAugmentationRow(f"row {g} is not an augmentation row")
        B[g] = np.einsum("ij,i->j", A[g], y)
    return B


def dirichlet_defect(aug_A, B, rows, U, normal):
    """``A_{GIj} U_I n_j - B_{Gj} n_j`` for the listed rows."""
    A = np.asarray(aug_A, dtype=float)[list(rows)]
    n = np.asarray(normal, dtype=float)
    return np.einsum("gij,i,j->g", A, np.asarray(U, dtype=float), n) - np.asarray(B)[list(rows)] @ n


def elastostatics_layout():
    """Augmentation arrays for y = (y1, y2, y3), F = (F11, ..., F33) in 3-D.

    Rows 3..11 (zero-based) encode ``d y_i/dx_j - F_ij = 0``; ``U`` stores
    ``F_ij`` at index ``3 + 3 i + j``.
    """
    A = np.zeros((12, 12, 3))
    B = np.zeros((12, 12))
    for i in range(3):
        for j in range(3):
            g = 3 + 3 * i + j
            A[g, i, j] = 1.0
            B[g, g] = 1.0
    return A, B


ELASTOSTATIC_ROWS = tuple(range(3, 12))
