"""Pointwise Lagrangians and their stationarity residuals.

Rate-dependent (U = y, v, F, P, g):

    L = -rho0 v.dt_gamma + N:grad_gamma - P:dt_Pi - sum_a r_a Pi:(m_a n_a P)
        - g.dt_Gamma - Gamma.(h r) - y.dt_xi - xi.v - y.div_Phi - Phi:F + H

Rate-independent (U = y, F, P, g, r, s, p), no implied sums over slip labels:

    L = -N:grad_gamma - P:dt_Pi - sum_a r_a Pi:(m_a n_a P) - y.div_Phi - Phi:F
        - g.dt_Gamma - Gamma.(h r)
        + sum_a (rho_a Y_a + rho_a s_a^2 + r_a Y_a mu_a + r_a nu_a - nu_a p_a^2) + H

``grad_gamma[i, j]`` stores d gamma_i / d x_j.  Every function is batched over
the rows of ``U``.
"""
from __future__ import annotations

import numpy as np

from .kinematics import check_admissible
from .models import RateDependentModel
from .state import Layout


def layout_for(model):
    kind = "rd" if isinstance(model, RateDependentModel) else "ri"
    return Layout(kind, model.nslip)


def _prepare(model, layout, U):
    blk = layout.unpack(U)
    check_admissible(blk["F"], blk["P"], blk["g"])
    B = blk["F"].shape[0]
    ns = model.nslip
    h = np.broadcast_to(model.hardening(blk["g"]), (B, ns, ns))
    schmid = model.geometry.schmid
    M = np.einsum("aik,bkj->baij", schmid, blk["P"])
    return blk, h, schmid, M


def lagrangian_rd(model, pot, U, D):
    layout = layout_for(model)
    blk, h, schmid, M = _prepare(model, layout, U)
    F, P, g, y, v = blk["F"], blk["P"], blk["g"], blk["y"], blk["v"]
    N = model.stress(F, P)
    r = model.slip_rate(model.resolved_shear(F, P), g)
    pi = np.einsum("ij,baij->ba", D["Pi"], M)
    return (-model.rho0 * v @ D["dt_gamma"]
            + np.einsum("bij,ij->b", N, D["grad_gamma"])
            - np.einsum("bij,ij->b", P, D["dt_Pi"])
            - np.sum(r * pi, axis=1)
            - g @ D["dt_Gamma"]
            - np.einsum("a,bac,bc->b", D["Gamma"], h, r)
            - y @ D["dt_xi"] - v @ D["xi"] - y @ D["div_Phi"]
            - np.einsum("bij,ij->b", F, D["Phi"])
            + pot.value(U))


def dtp_residual_rd(model, pot, U, D):
    layout = layout_for(model)
    U = np.atleast_2d(U)
    blk, h, schmid, M = _prepare(model, layout, U)
    F, P, g = blk["F"], blk["P"], blk["g"]
    R = model.response(F, P)
    r = model.slip_rate(R.tau, g)
    dr_dtau, dr_dg = model.slip_rate_partials(R.tau, g)
    dr_dF = dr_dtau[..., None, None] * R.dtau_dF
    dr_dP = dr_dtau[..., None, None] * R.dtau_dP
    pi = np.einsum("ij,baij->ba", D["Pi"], M)
    hG = np.einsum("a,bac->bc", D["Gamma"], h)  # sum_a Gamma_a h_ac
    c = pi + hG
    A = np.einsum("ba,aij->bij", r, schmid)
    HG = pot.grad(U)
    Hb = layout.unpack(HG)
    B = U.shape[0]
    res_y = -D["dt_xi"] - D["div_Phi"] + Hb["y"]
    res_v = -model.rho0 * D["dt_gamma"] - D["xi"] + Hb["v"]
    res_F = (np.einsum("kl,bklij->bij", D["grad_gamma"], R.dN_dF)
             - np.einsum("ba,baij->bij", c, dr_dF) - D["Phi"] + Hb["F"])
    res_P = (np.einsum("kl,bklij->bij", D["grad_gamma"], R.dN_dP) - D["dt_Pi"]
             - np.einsum("ba,baij->bij", c, dr_dP)
             - np.einsum("bir,bis->brs", A, np.broadcast_to(D["Pi"], (B, 3, 3)))
             + Hb["P"])
    # slip rate depends on g_a only through its own label
    res_g = (-c * dr_dg - D["dt_Gamma"]
             - np.einsum("k,kcm,bc->bm", D["Gamma"], model.hardening_dg(g), r) + Hb["g"])
    return layout.pack(y=res_y, v=res_v, F=res_F, P=res_P, g=res_g)


def yield_values(model, U):
    layout = layout_for(model)
    blk = layout.unpack(U)
    tau = model.resolved_shear(blk["F"], blk["P"])
    return model.yield_function(tau, blk["g"])


def constraint_rows(model, U):
    """(Y + s^2, r Y, r - p^2) per slip system, each (B, nslip)."""
    layout = layout_for(model)
    blk = layout.unpack(U)
    Y = yield_values(model, U)
    return Y + blk["s"] ** 2, blk["r"] * Y, blk["r"] - blk["p"] ** 2


def lagrangian_ri(model, pot, U, D):
    layout = layout_for(model)
    blk, h, schmid, M = _prepare(model, layout, U)
    F, P, g, y, r, s, p = (blk[k] for k in ("F", "P", "g", "y", "r", "s", "p"))
    N = model.stress(F, P)
    Y = model.yield_function(model.resolved_shear(F, P), g)
    pi = np.einsum("ij,baij->ba", D["Pi"], M)
    rho, mu, nu = D["rho"], D["mu"], D["nu"]
    return (-np.einsum("bij,ij->b", N, D["grad_gamma"])
            - np.einsum("bij,ij->b", P, D["dt_Pi"])
            - np.sum(r * pi, axis=1)
            - y @ D["div_Phi"] - np.einsum("bij,ij->b", F, D["Phi"])
            - g @ D["dt_Gamma"]
            - np.einsum("a,bac,bc->b", D["Gamma"], h, r)
            + np.sum(rho * Y + rho * s**2 + r * Y * mu + r * nu - nu * p**2, axis=1)
            + pot.value(U))


def dtp_residual_ri(model, pot, U, D):
    layout = layout_for(model)
    U = np.atleast_2d(U)
    blk, h, schmid, M = _prepare(model, layout, U)
    F, P, g, r, s, p = (blk[k] for k in ("F", "P", "g", "r", "s", "p"))
    R = model.response(F, P)
    Y = model.yield_function(R.tau, g)
    dY_dtau, dY_dg = model.yield_partials(R.tau, g)
    rho, mu, nu = D["rho"], D["mu"], D["nu"]
    w = rho + r * mu  # (B, ns), one weight per slip system
    pi = np.einsum("ij,baij->ba", D["Pi"], M)
    hG = np.einsum("a,bac->bc", D["Gamma"], h)
    A = np.einsum("ba,aij->bij", r, schmid)
    Hb = layout.unpack(pot.grad(U))
    B = U.shape[0]
    res_y = -D["div_Phi"] + Hb["y"]
    res_F = (-np.einsum("kl,bklij->bij", D["grad_gamma"], R.dN_dF) - D["Phi"]
             + np.einsum("ba,baij->bij", w * dY_dtau, R.dtau_dF) + Hb["F"])
    res_P = (-np.einsum("kl,bklij->bij", D["grad_gamma"], R.dN_dP) - D["dt_Pi"]
             - np.einsum("bir,bis->brs", A, np.broadcast_to(D["Pi"], (B, 3, 3)))
             + np.einsum("ba,baij->bij", w * dY_dtau, R.dtau_dP) + Hb["P"])
    # canonical yield depends on g_a only through its own label
    res_g = (w * dY_dg - D["dt_Gamma"]
             - np.einsum("a,acm,bc->bm", D["Gamma"], model.hardening_dg(g), r) + Hb["g"])
    res_r = -pi + Y * mu + nu - hG + Hb["r"]
    res_s = 2 * s * rho + Hb["s"]
    res_p = -2 * p * nu + Hb["p"]
    return layout.pack(y=res_y, F=res_F, P=res_P, g=res_g, r=res_r, s=res_s, p=res_p)


def lagrangian(model, pot, U, D):
    return (lagrangian_rd if D.kind == "rd" else lagrangian_ri)(model, pot, U, D)


def residual(model, pot, U, D):
    return (dtp_residual_rd if D.kind == "rd" else dtp_residual_ri)(model, pot, U, D)


def fd_jacobian(model, pot, U, D, rel_step=1e-5):
    """Central-difference Jacobian of the residual, unsymmetrized (n, n)."""
    U = np.asarray(U, dtype=float).ravel()
    n = U.size
    h = rel_step * np.maximum(1.0, np.abs(U))
    E = np.diag(h)
    batch = np.concatenate([U + E, U - E])
    R = residual(model, pot, batch, D)
    return ((R[:n] - R[n:]) / (2 * h[:, None])).T
