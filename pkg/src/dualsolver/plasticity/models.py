"""Constitutive kits for single-crystal plasticity at a material point.

Default kit: Saint-Venant-Kirchhoff elasticity on Fe = F P^-1, power-law slip
rate ``r = r0 sign(tau) (|tau|/g)^(1/m)`` and a constant hardening matrix
``h = h0 q`` with unit diagonal and latent ratio ``q_lat``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kinematics as kin
from .kinematics import SlipGeometry


@dataclass
class MaterialResponse:
    """Batched response values and partials at (F, P, g)."""
    N: np.ndarray
    dN_dF: np.ndarray
    dN_dP: np.ndarray
    tau: np.ndarray
    dtau_dF: np.ndarray
    dtau_dP: np.ndarray


@dataclass
class _Elastic:
    geometry: SlipGeometry = field(default_factory=SlipGeometry.single)
    lam: float = 1.0
    mu: float = 1.0
    h0: float = 0.5
    q_lat: float = 1.4

    @property
    def nslip(self):
        return self.geometry.nslip

    def stress(self, F, P):
        return kin.stress(F, P, self.lam, self.mu)

    def resolved_shear(self, F, P):
        return kin.resolved_shear(F, P, self.lam, self.mu, self.geometry)

    def response(self, F, P):
        dNF, dNP, dtF, dtP = kin.partials(F, P, self.lam, self.mu, self.geometry)
        return MaterialResponse(self.stress(F, P), dNF, dNP, self.resolved_shear(F, P), dtF, dtP)

    def hardening(self, g):
        ns = self.nslip
        q = np.full((ns, ns), self.q_lat)
        np.fill_diagonal(q, 1.0)
        return self.h0 * q

    def hardening_dg(self, g):
        """d h_ab / d g_c, shape (ns, ns, ns); zero for the constant kit."""
        ns = self.nslip
        return np.zeros((ns, ns, ns))


@dataclass
class RateDependentModel(_Elastic):
    rho0: float = 1.0
    r0: float = 1.0
    m_rate: float = 0.2

    def slip_rate(self, tau, g):
        x = np.abs(tau) / g
        return self.r0 * np.sign(tau) * x ** (1.0 / self.m_rate)

    def slip_rate_partials(self, tau, g):
        """(dr/dtau, dr/dg), each elementwise in the slip index."""
        k = 1.0 / self.m_rate
        x = np.abs(tau) / g
        dr_dtau = self.r0 * k * x ** (k - 1) / g
        dr_dg = -k * self.slip_rate(tau, g) / g
        return dr_dtau, dr_dg


@dataclass
class RateIndependentModel(_Elastic):

    def yield_function(self, tau, g):
        return tau - g

    def yield_partials(self, tau, g):
        """(dY/dtau, dY/dg): canonical Y = tau - g."""
        return np.ones_like(tau), -np.ones_like(g)


def check_model_partials(model, rng=None, samples=3, h=1e-6):
    """Max relative deviation of supplied partials from central differences."""
    rng = np.random.default_rng(rng)
    worst = 0.0
    for _ in range(samples):
        F = (np.eye(3) + 0.1 * rng.standard_normal((3, 3)))[None]
        P = (np.eye(3) + 0.05 * rng.standard_normal((3, 3)))[None]
        kin.check_admissible(F, P)
        R = model.response(F, P)
        for i in range(3):
            for j in range(3):
                E = np.zeros((1, 3, 3))
                E[0, i, j] = h
                for X, dN, dt, shift in ((F, R.dN_dF, R.dtau_dF, 0), (P, R.dN_dP, R.dtau_dP, 1)):
                    Xp, Xm = X + E, X - E
                    args_p = (Xp, P) if shift == 0 else (F, Xp)
                    args_m = (Xm, P) if shift == 0 else (F, Xm)
                    fdN = (model.stress(*args_p) - model.stress(*args_m)) / (2 * h)
                    fdt = (model.resolved_shear(*args_p) - model.resolved_shear(*args_m)) / (2 * h)
                    worst = max(worst,
                                np.abs(fdN - dN[..., i, j]).max() / max(1.0, np.abs(fdN).max()),
                                np.abs(fdt - dt[..., i, j]).max() / max(1.0, np.abs(fdt).max()))
        if isinstance(model, RateDependentModel):
            tau = model.resolved_shear(F, P)
            g = rng.uniform(0.5, 1.5, tau.shape)
            dtau, dg = model.slip_rate_partials(tau, g)
            fd_tau = (model.slip_rate(tau + h, g) - model.slip_rate(tau - h, g)) / (2 * h)
            fd_g = (model.slip_rate(tau, g + h) - model.slip_rate(tau, g - h)) / (2 * h)
            worst = max(worst, np.abs(fd_tau - dtau).max() / max(1.0, np.abs(fd_tau).max()),
                        np.abs(fd_g - dg).max() / max(1.0, np.abs(fd_g).max()))
    return float(worst)
