"""Multiplicative kinematics and Saint-Venant-Kirchhoff response.

All functions are batched over a leading axis: ``F, P`` have shape (B, 3, 3).

    Fe = F P^-1,  E = (Fe^T Fe - I)/2,  S = lam tr(E) I + 2 mu E
    N  = Fe S P^-T                      (first Piola-Kirchhoff stress)
    tau_a = det(F)^-1 m_a . (Fe^T Fe S n_a)  (resolved shear stress)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InadmissibleState

DET_MIN = 1e-8
G_MIN = 1e-8

_I = np.eye(3)
_BASIS = np.eye(9).reshape(9, 3, 3)


@dataclass
class SlipGeometry:
    m: np.ndarray
    n: np.ndarray

    def __post_init__(self):
        self.m = np.atleast_2d(np.asarray(self.m, dtype=float))
        self.n = np.atleast_2d(np.asarray(self.n, dtype=float))
        if self.m.shape != self.n.shape or self.m.shape[1] != 3:
            raise ValueError("slip directions and normals must be (nslip, 3)")
        if np.abs(np.linalg.norm(self.m, axis=1) - 1).max() > 1e-12:
            raise ValueError("slip directions must be unit vectors")
        if np.abs(np.linalg.norm(self.n, axis=1) - 1).max() > 1e-12:
            raise ValueError("slip normals must be unit vectors")
        if np.abs(np.einsum("ai,ai->a", self.m, self.n)).max() > 1e-12:
            raise ValueError("slip direction and normal must be orthogonal")

    @property
    def nslip(self):
        return self.m.shape[0]

    @property
    def schmid(self):
        """m_a (x) n_a, shape (nslip, 3, 3)."""
        return np.einsum("ai,aj->aij", self.m, self.n)

    def permuted(self, order):
        order = np.asarray(order)
        return SlipGeometry(self.m[order], self.n[order])

    @classmethod
    def single(cls):
        return cls([[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])

    @classmethod
    def planar_double(cls, angle=np.pi / 3):
        c, s = np.cos(angle), np.sin(angle)
        return cls([[1.0, 0.0, 0.0], [c, s, 0.0]], [[0.0, 1.0, 0.0], [-s, c, 0.0]])


def check_admissible(F, P, g=None):
    dF = np.linalg.det(F)
    dP = np.linalg.det(P)
    if np.any(~np.isfinite(dF)) or np.any(dF <= DET_MIN):
        raise InadmissibleState(f"det F = {np.min(dF):.3g} not admissible")
    if np.any(~np.isfinite(dP)) or np.any(dP <= DET_MIN):
        raise InadmissibleState(f"det P = {np.min(dP):.3g} not admissible")
    if g is not None and (np.any(~np.isfinite(g)) or np.any(g <= G_MIN)):
        raise InadmissibleState(f"slip strength {np.min(g):.3g} not admissible")


def _sym(A):
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def _T(A):
    return np.swapaxes(A, -1, -2)


def svk_state(F, P, lam, mu):
    Pinv = np.linalg.inv(P)
    Fe = F @ Pinv
    E = 0.5 * (_T(Fe) @ Fe - _I)
    S = lam * np.trace(E, axis1=-2, axis2=-1)[..., None, None] * _I + 2 * mu * E
    return Fe, S, Pinv


def stress(F, P, lam, mu):
    Fe, S, Pinv = svk_state(F, P, lam, mu)
    return Fe @ S @ _T(Pinv)


def resolved_shear(F, P, lam, mu, geom):
    Fe, S, _ = svk_state(F, P, lam, mu)
    Ce = _T(Fe) @ Fe
    J = np.linalg.det(F)
    return np.einsum("ai,bij,bjk,ak->ba", geom.m, Ce, S, geom.n) / J[:, None]


def _directional(F, P, dF, dP, lam, mu, geom):
    """Derivatives of N and tau along (dF, dP); dF, dP broadcast as (B, K, 3, 3)."""
    Fe, S, Pinv = svk_state(F, P, lam, mu)
    Fe, S, Pinv, Fb = Fe[:, None], S[:, None], Pinv[:, None], F[:, None]
    dPinv = -Pinv @ dP @ Pinv
    dFe = dF @ Pinv + Fb @ dPinv
    dE = _sym(_T(Fe) @ dFe)
    dS = lam * np.trace(dE, axis1=-2, axis2=-1)[..., None, None] * _I + 2 * mu * dE
    dN = dFe @ S @ _T(Pinv) + Fe @ dS @ _T(Pinv) + Fe @ S @ _T(dPinv)
    Ce = _T(Fe) @ Fe
    dCe = _T(dFe) @ Fe + _T(Fe) @ dFe
    J = np.linalg.det(F)[:, None]
    Finv = np.linalg.inv(F)[:, None]
    trJ = np.trace(Finv @ dF, axis1=-2, axis2=-1)
    tau = resolved_shear(F, P, lam, mu, geom)[:, None, :]
    inner = dCe @ S + Ce @ dS
    dtau = -trJ[..., None] * tau + np.einsum("ai,bkij,aj->bka", geom.m, inner, geom.n) / J[..., None]
    return dN, dtau


def partials(F, P, lam, mu, geom):
    """dN/dF, dN/dP as (B, 3, 3, 3, 3) [k, l, i, j] and dtau/dF, dtau/dP as (B, nslip, 3, 3)."""
    B = F.shape[0]
    zero = np.zeros((1, 9, 3, 3))
    basis = _BASIS[None]
    dN_F, dt_F = _directional(F, P, basis, zero, lam, mu, geom)
    dN_P, dt_P = _directional(F, P, zero, basis, lam, mu, geom)
    ns = geom.nslip
    dN_dF = np.moveaxis(dN_F.reshape(B, 3, 3, 3, 3), (1, 2), (3, 4))
    dN_dP = np.moveaxis(dN_P.reshape(B, 3, 3, 3, 3), (1, 2), (3, 4))
    dtau_dF = np.moveaxis(dt_F, 1, 2).reshape(B, ns, 3, 3)
    dtau_dP = np.moveaxis(dt_P, 1, 2).reshape(B, ns, 3, 3)
    return dN_dF, dN_dP, dtau_dF, dtau_dP
