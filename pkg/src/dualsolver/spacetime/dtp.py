"""Pointwise dual-to-primal map for first-order systems.

At each point the primal value solves

    dL/dU = -C^T dD/dt - JF^T dD/dx + JG^T D + grad H(U) = 0,

whose Hessian ``K = -sum dD/dx_G F''_G + sum D_G G''_G + hess H`` must stay
positive definite.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import MaxIterations, NonConvexInner


@dataclass
class PointwiseResult:
    U: np.ndarray
    K: np.ndarray
    iterations: int
    residual_max: float
    min_eig: float


def lagrangian(sys, pot, U, Dl, x, t, Ubar):
    """L_H at points; ``Dl`` is (P, 3, N*) ordered (d/dt, d/dx, value)."""
    CU = U @ sys.C.T
    return (-np.einsum("pg,pg->p", CU, Dl[:, 0])
            - np.einsum("pg,pg->p", sys.flux(U), Dl[:, 1])
            + np.einsum("pg,pg->p", sys.source(U, x, t), Dl[:, 2])
            + pot.value(U, Ubar))


def dL_dD(sys, U, x, t):
    """Explicit derivative of L_H in (dD/dt, dD/dx, D): (P, 3, N*)."""
    return np.stack([-(U @ sys.C.T), -sys.flux(U), sys.source(U, x, t)], axis=1)


def coupling(sys, U, x, t):
    """d^2 L / dD dU as (P, 3 N*, N)."""
    P = U.shape[0]
    C = np.broadcast_to(-sys.C, (P,) + sys.C.shape)
    return np.concatenate([C, -sys.flux_jac(U), sys.source_jac(U, x, t)], axis=1)


def residual(sys, pot, U, Dl, x, t, Ubar):
    return (-Dl[:, 0] @ sys.C
            - np.einsum("pgi,pg->pi", sys.flux_jac(U), Dl[:, 1])
            + np.einsum("pgi,pg->pi", sys.source_jac(U, x, t), Dl[:, 2])
            + pot.grad(U, Ubar))


def _scale(sys, pot, U, Dl, x, t, Ubar):
    a = np.abs(Dl[:, 0] @ sys.C)
    b = np.abs(np.einsum("pgi,pg->pi", sys.flux_jac(U), Dl[:, 1]))
    c = np.abs(np.einsum("pgi,pg->pi", sys.source_jac(U, x, t), Dl[:, 2]))
    h = np.abs(pot.grad(U, Ubar))
    return np.maximum(1.0, np.linalg.norm(a + b + c + h, axis=1))


def hessian(sys, pot, U, Dl, x, t, Ubar):
    return (-np.einsum("pgij,pg->pij", sys.flux_hessian(U), Dl[:, 1])
            + np.einsum("pgij,pg->pij", sys.source_hessian(U, x, t), Dl[:, 2])
            + pot.hess(U, Ubar))


def dtp_batch(sys, pot, Dl, x, t, Ubar, tol=1e-12, max_iter=50, U0=None):
    """Damped Newton on all points at once.

    Errors carry ``location`` = flat point index of the first offender.
    """
    Dl = np.asarray(Dl, dtype=float)
    U = Ubar.copy() if U0 is None else np.array(U0, dtype=float)
    P = U.shape[0]
    if not np.any(Dl):
        K = hessian(sys, pot, U, Dl, x, t, Ubar)
        return PointwiseResult(U, K, 0, 0.0, float(np.linalg.eigvalsh(K).min()) if P else np.inf)

    r = residual(sys, pot, U, Dl, x, t, Ubar)
    for it in range(max_iter + 1):
        rn = np.linalg.norm(r, axis=1)
        scale = _scale(sys, pot, U, Dl, x, t, Ubar)
        K = hessian(sys, pot, U, Dl, x, t, Ubar)
        eig = np.linalg.eigvalsh(K)[:, 0]
        bad = np.flatnonzero(eig <= 0)
        if bad.size:
            p = int(bad[0])
            raise NonConvexInner("pointwise Hessian not positive definite",
                                 min_eig=float(eig[p]), location=p)
        active = rn > tol * scale
        if not np.any(active):
            return PointwiseResult(U, K, it, float((rn / scale).max()), float(eig.min()))
        if it == max_iter:
            break
        act = np.flatnonzero(active)
        step = -np.linalg.solve(K[act], r[act][:, :, None])[:, :, 0]
        phi0 = lagrangian(sys, pot, U[act], Dl[act], x[act], t[act], Ubar[act])
        slope = np.einsum("pi,pi->p", r[act], step)
        s = np.ones(act.size)
        pending = np.arange(act.size)
        Unew = U[act].copy()
        rnew = r[act].copy()
        for _ in range(40):
            idx = act[pending]
            trial = U[idx] + s[pending, None] * step[pending]
            rt = residual(sys, pot, trial, Dl[idx], x[idx], t[idx], Ubar[idx])
            pt = lagrangian(sys, pot, trial, Dl[idx], x[idx], t[idx], Ubar[idx])
            ok = ((pt <= phi0[pending] + 1e-4 * s[pending] * slope[pending])
                  | (np.linalg.norm(rt, axis=1) < (1 - 1e-4 * s[pending]) * rn[idx]))
            Unew[pending[ok]] = trial[ok]
            rnew[pending[ok]] = rt[ok]
            pending = pending[~ok]
            if pending.size == 0:
                break
            s[pending] *= 0.5
        U[act] = Unew
        r[act] = rnew
    worst = int(np.argmax(np.linalg.norm(r, axis=1)))
    raise MaxIterations(f"pointwise DtP did not converge in {max_iter} iterations",
                        location=worst)


def pointwise_dtp(sys, pot, Dlocal, x, t, tol=1e-12, max_iter=50):
    """DtP at a single point; ``Dlocal`` is (3, N*) = (dD/dt, dD/dx, D)."""
    Dl = np.asarray(Dlocal, dtype=float).reshape(1, 3, sys.Nstar)
    xa = np.array([float(x)])
    ta = np.array([float(t)])
    Ubar = pot.sample(xa, ta)
    return dtp_batch(sys, pot, Dl, xa, ta, Ubar, tol=tol, max_iter=max_iter).U[0]
