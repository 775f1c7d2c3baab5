"""Material-point DtP solves, convexity audits and the minimization oracle."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from ..errors import InadmissibleState, MaxIterations, NonConvexInner
from . import residuals as res
from .residuals import layout_for
from .state import DualPointValue

DET_P_DRIFT_TOL = 1e-6


@dataclass
class DtPReport:
    iterations: int
    residual_norm: float
    min_eig: float
    jacobian_asymmetry: float
    det_P_drift: float
    history: list = field(default_factory=list)

    @property
    def det_P_preserved(self):
        return self.det_P_drift <= DET_P_DRIFT_TOL


def _det_P(layout, U):
    return float(np.linalg.det(layout.unpack(U)["P"][0]))


def _asymmetry(J):
    return float(np.abs(J - J.T).max() / max(1.0, np.abs(J).max()))


def _safe_residual(model, pot, U, D):
    try:
        return res.residual(model, pot, U, D)[0]
    except InadmissibleState:
        return None


def _require_convex(Js):
    min_eig = float(np.linalg.eigvalsh(Js)[0])
    if min_eig <= 0:
        raise NonConvexInner(
            f"DtP Hessian has eigenvalue {min_eig:.3e}; increase the weights of H "
            f"(convexity_audit suggests a factor)", min_eig=min_eig)
    return min_eig


def dtp_solve(model, pot, Dval, tol=1e-12, max_iter=50, U0=None):
    """Newton on the stationarity residual from the base state (or ``U0``).

    The Jacobian is a central difference of the residual; its symmetric part
    drives the step and its smallest eigenvalue certifies strict convexity.
    """
    layout = layout_for(model)
    if Dval.kind != layout.kind or Dval.nslip != layout.nslip:
        raise ValueError("dual value does not match the model layout")
    U = np.array(pot.base if U0 is None else U0, dtype=float)
    R = res.residual(model, pot, U, Dval)[0]
    scale = max(1.0, Dval.norm(), float(np.abs(pot.grad(U)).max()))
    history = [float(np.abs(R).max())]
    min_eig, asym = np.nan, 0.0
    it = 0
    while history[-1] > tol * scale:
        if it >= max_iter:
            raise MaxIterations(f"DtP residual {history[-1]:.3e} after {it} iterations")
        J = res.fd_jacobian(model, pot, U, Dval)
        asym = _asymmetry(J)
        Js = 0.5 * (J + J.T)
        min_eig = _require_convex(Js)
        step = np.linalg.solve(Js, -R)
        t, norm0 = 1.0, np.linalg.norm(R)
        while True:
            Rn = _safe_residual(model, pot, U + t * step, Dval)
            if Rn is not None and np.linalg.norm(Rn) < (1 - 1e-4 * t) * norm0:
                break
            t *= 0.5
            if t < 1e-10:
                raise MaxIterations(f"DtP line search failed at residual {history[-1]:.3e}")
        U = U + t * step
        R = Rn
        it += 1
        history.append(float(np.abs(R).max()))
        scale = max(1.0, Dval.norm(), float(np.abs(pot.grad(U)).max()))
    if np.isnan(min_eig):
        # stationary at the start: still a saddle unless the Hessian is PD
        J = res.fd_jacobian(model, pot, U, Dval)
        asym = _asymmetry(J)
        min_eig = _require_convex(0.5 * (J + J.T))
    drift = abs(_det_P(layout, U) - _det_P(layout, pot.base))
    return U, DtPReport(it, history[-1], min_eig, asym, drift, history)


def dtp_solve_rd(model, pot, Dval, **kw):
    if Dval.kind != "rd":
        raise ValueError("rate-dependent solve needs a rate-dependent dual value")
    return dtp_solve(model, pot, Dval, **kw)


def dtp_solve_ri(model, pot, Dval, **kw):
    if Dval.kind != "ri":
        raise ValueError("rate-independent solve needs a rate-independent dual value")
    return dtp_solve(model, pot, Dval, **kw)


@dataclass
class ConvexityReport:
    min_eig: float
    samples: int
    weight_scale: float
    dominant_block: str
    block_scale: float
    eigs: np.ndarray

    @property
    def positive_definite(self):
        return self.min_eig > 0


def _hessian(model, pot, U, D):
    J = res.fd_jacobian(model, pot, U, D)
    return 0.5 * (J + J.T)


def _block_scale(model, pot, D, samples, block):
    """Smallest factor on ``a[block]`` making every sampled Hessian PD (bisection)."""
    def ok(c):
        p = pot.scaled(c, [block])
        return all(np.linalg.eigvalsh(_hessian(model, p, U, D))[0] > 0 for U in samples)

    hi = 2.0
    while not ok(hi):
        hi *= 4
        if hi > 1e8:
            return np.inf
    lo = 1.0
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
        if hi / lo < 1.01:
            break
    return hi


def convexity_audit(model, pot, Dval, box=0.01, samples=20, rng=None):
    """Sample U in ``base + box*[-1, 1]^n`` and report the worst Hessian eigenvalue.

    ``weight_scale`` is the uniform factor on every ``a`` that restores PD for
    the sampled coupling (1 when already PD); ``block_scale`` is the factor on
    the dominant block alone.
    """
    layout = layout_for(model)
    rng = np.random.default_rng(rng)
    base = pot.base
    pts = [base] + [base + box * rng.uniform(-1, 1, base.size) for _ in range(samples - 1)]
    pts = [U for U in pts if _safe_residual(model, pot, U, Dval) is not None]
    a = pot.a_vector
    isq = 1.0 / np.sqrt(a)
    worst, worst_vec, coupling = np.inf, None, np.inf
    eigs = []
    for U in pts:
        Hs = _hessian(model, pot, U, Dval)
        w, V = np.linalg.eigh(Hs)
        eigs.append(w[0])
        if w[0] < worst:
            worst, worst_vec = w[0], V[:, 0]
        K = Hs - pot.hess(U)
        coupling = min(coupling, np.linalg.eigvalsh(isq[:, None] * K * isq[None, :])[0])
    mass = {b: float(np.sum(worst_vec[s] ** 2)) for b, s in layout.slices.items()}
    dominant = max(mass, key=mass.get)
    if worst > 0:
        scale, bscale = 1.0, 1.0
    else:
        scale = 1.1 * max(1.0, -coupling)
        bscale = _block_scale(model, pot, Dval, pts, dominant)
    return ConvexityReport(float(worst), len(pts), float(scale), dominant, float(bscale),
                           np.asarray(eigs))


def _fd_grad(model, pot, U, D, h=1e-4):
    """Fourth-order central gradient of the Lagrangian value (batched)."""
    U = np.atleast_2d(U)
    B, n = U.shape
    steps = h * np.maximum(1.0, np.abs(U))
    E = np.eye(n)[None] * steps[:, None, :]
    pts = np.concatenate([U[:, None] + 2 * E, U[:, None] + E, U[:, None] - E,
                          U[:, None] - 2 * E], axis=1).reshape(-1, n)
    L = res.lagrangian(model, pot, pts, D).reshape(B, 4, n)
    return (-L[:, 0] + 8 * L[:, 1] - 8 * L[:, 2] + L[:, 3]) / (12 * steps)


def minimize_lagrangian(model, pot, Dval, U0=None, polish=4):
    """Independent oracle: minimize the Lagrangian value over U.

    Uses only Lagrangian values (finite-difference gradients), BFGS, then a
    few Newton polish steps on a finite-difference Hessian of the gradient.
    """
    x0 = np.array(pot.base if U0 is None else U0, dtype=float)

    def fun(x):
        try:
            return float(res.lagrangian(model, pot, x[None], Dval)[0])
        except InadmissibleState:
            return np.inf

    def jac(x):
        return _fd_grad(model, pot, x, Dval)[0]

    out = optimize.minimize(fun, x0, jac=jac, method="BFGS", options={"gtol": 1e-10,
                                                                      "maxiter": 2000})
    x = out.x
    n = x.size
    for _ in range(polish):
        h = 1e-4 * np.maximum(1.0, np.abs(x))
        E = np.diag(h)
        G = _fd_grad(model, pot, np.concatenate([x + E, x - E]), Dval)
        Hs = (G[:n] - G[n:]) / (2 * h[:, None])
        Hs = 0.5 * (Hs + Hs.T)
        g = jac(x)
        x = x - np.linalg.solve(Hs, g)
    return x


def enforce_constraint_rows(model, pot, Dval, tol=1e-14, max_iter=20):
    """Adjust (rho, nu) so the constraint rows vanish at the DtP solution.

    Returns ``(Dval', U, rows)`` with rows = (Y + s^2, r Y, r - p^2).  The
    rows Y + s^2 and r - p^2 form a square system in (rho, nu); mu is kept.
    The complementarity row r Y is not imposed: it equals -p^2 s^2 once the
    other two hold, so it vanishes whenever p or s does.
    """
    if Dval.kind != "ri":
        raise ValueError("constraint rows exist only for the rate-independent model")
    ns = Dval.nslip
    warm = {"U": None}

    def dual(z):
        return Dval.replace(rho=z[:ns], nu=z[ns:])

    def rows(z):
        U, _ = dtp_solve(model, pot, dual(z), U0=warm["U"])
        warm["U"] = U
        c1, _, c3 = res.constraint_rows(model, U[None])
        return np.concatenate([c1[0], c3[0]])

    # the rows are nearly linear in (rho, nu): Newton with a difference Jacobian
    z = np.concatenate([Dval["rho"], Dval["nu"]])
    F0 = rows(z)
    for _ in range(max_iter):
        if np.abs(F0).max() <= tol:
            break
        eps = 1e-7
        J = np.column_stack([(rows(z + eps * e) - F0) / eps for e in np.eye(z.size)])
        z = z - np.linalg.solve(J, F0)
        F0 = rows(z)
    D2 = dual(z)
    U, _ = dtp_solve(model, pot, D2, U0=warm["U"])
    out = res.constraint_rows(model, U[None])
    return D2, U, tuple(r[0] for r in out)


def default_base(model, shear=0.05, g=0.1, Ubar=None):
    """Stressed base state: simple shear F = I + shear e1(x)e2, P = I.

    For the rate-independent model the slacks are made consistent with an
    elastic state: r = p = 0 and s = sqrt(-Y).
    """
    layout = layout_for(model)
    s = layout.slices
    U = np.zeros(layout.size)
    F = np.eye(3)
    F[0, 1] = shear
    U[s["F"]] = F.ravel()
    U[s["P"]] = np.eye(3).ravel()
    U[s["g"]] = g
    if layout.kind == "ri":
        Y = res.yield_values(model, U[None])[0]
        if np.any(Y > 0):
            raise ValueError("base state is not elastic; lower the shear or raise g")
        U[s["s"]] = np.sqrt(-Y)
    return U


def random_dual(kind, nslip, rng, scale):
    return DualPointValue.random(kind, nslip, rng, scale)
