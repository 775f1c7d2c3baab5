"""Finite-dimensional dual scheme for nonlinear algebraic systems A(x) = 0.

The primal system is paired with multipliers ``z`` and an auxiliary potential
``H``.  For each ``z`` the dual-to-primal (DtP) map ``x_H(z)`` solves

    z . dA/dx (x) + grad H(x) = 0,

and the dual objective ``S_H(z) = z . A(x_H(z)) + H(x_H(z))`` has gradient
``A(x_H(z))``.  Critical points of ``S_H`` therefore recover primal solutions.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import MaxInnerIterations, NonConvexInner
from .potential import AuxPotential

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps


class Status(str, enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    DTP_FAILURE = "dtp_failure"
    STAGNATION = "stagnation"


@dataclass
class SolverOptions:
    tol_inner: float = 1e-12
    tol_outer: float = 1e-10
    max_inner: int = 60
    max_outer: int = 100
    require_convex: bool = True
    jitter: float = 1e-6
    seed: int = 0


class AlgebraicSystem:
    """Residual ``A: R^n -> R^N`` with first and second derivatives.

    ``second_directional(x, z)`` must return ``sum_a z_a d2A_a/dxdx``.  When it
    is omitted, it is built from central differences of ``jacobian``.
    """

    def __init__(self, n: int, N: int, residual: Callable, jacobian: Callable,
                 second_directional: Callable | None = None, name: str = "custom"):
        self.n = int(n)
        self.N = int(N)
        self._residual = residual
        self._jacobian = jacobian
        self._second = second_directional
        self.name = name

    def residual(self, x):
        return np.asarray(self._residual(np.asarray(x, dtype=float)), dtype=float).reshape(self.N)

    def jacobian(self, x):
        return np.asarray(self._jacobian(np.asarray(x, dtype=float)),
                          dtype=float).reshape(self.N, self.n)

    def second_directional(self, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        if self._second is not None:
            return np.asarray(self._second(x, z), dtype=float).reshape(self.n, self.n)
        out = np.empty((self.n, self.n))
        for i in range(self.n):
            h = np.sqrt(EPS) * (1.0 + abs(x[i]))
            e = np.zeros(self.n)
            e[i] = h
            out[:, i] = (self.jacobian(x + e).T @ z - self.jacobian(x - e).T @ z) / (2 * h)
        return 0.5 * (out + out.T)

    @property
    def has_analytic_second(self):
        return self._second is not None

    @classmethod
    def linear(cls, matrix, rhs):
        """``A(x) = matrix @ x - rhs``."""
        A = np.atleast_2d(np.asarray(matrix, dtype=float))
        b = np.asarray(rhs, dtype=float).ravel()
        N, n = A.shape
        if b.size != N:
            raise ValueError("rhs length must match matrix rows")
        return cls(n, N, lambda x: A @ x - b, lambda x: A,
                   lambda x, z: np.zeros((n, n)), name="linear")


def circle_line(alpha: float) -> AlgebraicSystem:
    """x^2 + y^2 = 1 intersected with x = alpha."""
    alpha = float(alpha)

    def residual(x):
        return np.array([x[0] ** 2 + x[1] ** 2 - 1.0, x[0] - alpha])

    def jacobian(x):
        return np.array([[2 * x[0], 2 * x[1]], [1.0, 0.0]])

    def second(x, z):
        return 2.0 * z[0] * np.eye(2)

    return AlgebraicSystem(2, 2, residual, jacobian, second, name="circle_line")


def check_jacobian(sys: AlgebraicSystem, x) -> float:
    """Relative error between ``sys.jacobian`` and central differences."""
    x = np.asarray(x, dtype=float)
    J = sys.jacobian(x)
    fd = np.empty_like(J)
    for i in range(sys.n):
        h = EPS ** (1 / 3) * (1.0 + abs(x[i]))
        e = np.zeros(sys.n)
        e[i] = h
        fd[:, i] = (sys.residual(x + e) - sys.residual(x - e)) / (2 * h)
    return float(np.linalg.norm(J - fd) / max(np.linalg.norm(J), 1.0))


@dataclass
class DtPResult:
    x: np.ndarray
    inner_iterations: int
    inner_residual_norm: float
    inner_hessian_min_eig: float
    hessian: np.ndarray = field(repr=False, default=None)
    jacobian: np.ndarray = field(repr=False, default=None)
    residual: np.ndarray = field(repr=False, default=None)


@dataclass
class DualSolveReport:
    z: np.ndarray
    primal: np.ndarray
    dual_gradient_norm: float
    outer_iterations: int
    status: Status
    inner_residual_max: float = 0.0
    history: list = field(default_factory=list, repr=False)

    @property
    def converged(self):
        return self.status is Status.CONVERGED


def _inner_merit(sys, pot, z, x):
    return float(z @ sys.residual(x)) + pot.value(x)


def _inner_grad(sys, pot, z, x):
    return sys.jacobian(x).T @ z + pot.grad(x)


def dtp_solve(sys: AlgebraicSystem, pot: AuxPotential, z, *, tol: float = 1e-12,
              max_iter: int = 60, require_convex: bool = True, x0=None) -> DtPResult:
    """Solve the pointwise stationarity ``z . dA/dx + grad H = 0`` for x.

    Newton with a line search, started from the base state (or ``x0``).  With
    ``require_convex`` an indefinite inner Hessian gets a Levenberg shift, and
    the returned point must have a positive definite Hessian.  Without it, any
    nonsingular stationary point is accepted.
    """
    z = np.asarray(z, dtype=float).reshape(sys.N)
    x = pot.base.copy() if x0 is None else np.asarray(x0, dtype=float).copy()
    phi0 = abs(_inner_merit(sys, pot, z, x))
    shifted = False
    g = _inner_grad(sys, pot, z, x)
    for it in range(max_iter + 1):
        J = sys.jacobian(x)
        gH = pot.grad(x)
        g = J.T @ z + gH
        scale = max(1.0, np.linalg.norm(J.T @ z), np.linalg.norm(gH))
        if np.linalg.norm(g) <= tol * scale:
            K = sys.second_directional(x, z) + pot.hess(x)
            K = 0.5 * (K + K.T)
            lam = float(np.linalg.eigvalsh(K)[0])
            if require_convex and lam <= 0:
                raise NonConvexInner("inner Hessian not positive definite at DtP point", lam)
            if not require_convex and abs(lam) <= 1e3 * EPS * max(1.0, np.abs(K).max()):
                raise NonConvexInner("inner Hessian singular at DtP point", lam)
            return DtPResult(x, it, float(np.linalg.norm(g)), lam, K, J, sys.residual(x))
        if it == max_iter:
            break
        K = sys.second_directional(x, z) + pot.hess(x)
        K = 0.5 * (K + K.T)
        if require_convex:
            step, mu = _modified_newton_step(K, g)
            shifted |= mu > 0
        else:
            try:
                step = -np.linalg.solve(K, g)
            except np.linalg.LinAlgError:
                raise NonConvexInner("singular inner Hessian during DtP Newton") from None
        x, ok = _inner_line_search(sys, pot, z, x, g, step)
        if not ok:
            break
        if require_convex and _inner_merit(sys, pot, z, x) < -1e12 * (1.0 + phi0):
            raise NonConvexInner("inner objective unbounded below; z outside convexity region")
    lam = float(np.linalg.eigvalsh(0.5 * (K + K.T))[0])
    if shifted or (require_convex and lam <= 0):
        raise NonConvexInner(f"DtP Newton did not converge (|grad|={np.linalg.norm(g):.3e})", lam)
    raise MaxInnerIterations(f"DtP Newton did not converge in {max_iter} iterations "
                             f"(|grad|={np.linalg.norm(g):.3e})")


def _modified_newton_step(K, g):
    try:
        c = sla.cho_factor(K)
        return -sla.cho_solve(c, g), 0.0
    except np.linalg.LinAlgError:
        pass
    mu = max(1e-8 * max(1.0, np.abs(K).max()), -float(np.linalg.eigvalsh(K)[0]))
    for _ in range(200):
        try:
            c = sla.cho_factor(K + mu * np.eye(K.shape[0]))
            return -sla.cho_solve(c, g), mu
        except np.linalg.LinAlgError:
            mu *= 2.0
    raise NonConvexInner("Levenberg shift failed to restore positive definiteness")


def _inner_line_search(sys, pot, z, x, g, step):
    phi = _inner_merit(sys, pot, z, x)
    gn = np.linalg.norm(g)
    slope = float(g @ step)
    t = 1.0
    for _ in range(40):
        xt = x + t * step
        try:
            gt = _inner_grad(sys, pot, z, xt)
            phit = _inner_merit(sys, pot, z, xt)
        except (FloatingPointError, ValueError):
            t *= 0.5
            continue
        if np.all(np.isfinite(gt)) and (
                np.linalg.norm(gt) < (1 - 1e-4 * t) * gn
                or (slope < 0 and phit <= phi + 1e-4 * t * slope)):
            return xt, True
        t *= 0.5
    return x, False


def dual_objective(sys, pot, z, dtp: DtPResult | None = None, **kw) -> float:
    z = np.asarray(z, dtype=float)
    dtp = dtp or dtp_solve(sys, pot, z, **kw)
    return float(z @ sys.residual(dtp.x)) + pot.value(dtp.x)


def dual_gradient(sys, pot, z, dtp: DtPResult | None = None, **kw) -> np.ndarray:
    """``A(x_H(z))``; the envelope identity removes any dx/dz contribution."""
    dtp = dtp or dtp_solve(sys, pot, z, **kw)
    return sys.residual(dtp.x)


def dual_hessian(sys, pot, z, dtp: DtPResult | None = None, **kw) -> np.ndarray:
    """``-J K^{-1} J^T`` at ``x_H(z)``, symmetrized exactly."""
    dtp = dtp or dtp_solve(sys, pot, z, **kw)
    J = dtp.jacobian
    K = dtp.hessian
    if dtp.inner_hessian_min_eig > 0:
        W = sla.cho_solve(sla.cho_factor(K), J.T)
    elif kw.get("require_convex", True):
        raise NonConvexInner("dual Hessian needs a positive definite inner Hessian",
                             dtp.inner_hessian_min_eig)
    else:
        W = np.linalg.solve(K, J.T)
    Hs = -J @ W
    return 0.5 * (Hs + Hs.T)


def _ascent_directions(Hs, g):
    """Newton direction (pseudo-inverse when near singular), then gradient."""
    w, V = np.linalg.eigh(-Hs)
    wmax = max(abs(w).max(), EPS)
    keep = np.abs(w) > 1e-12 * wmax
    dirs = []
    if keep.any():
        coef = (V[:, keep].T @ g) / w[keep]
        dirs.append(V[:, keep] @ coef)
    curv = float(g @ (-Hs) @ g)
    if curv > 1e-14 * wmax * (g @ g):
        dirs.append(g * (g @ g) / curv)
    else:
        dirs.append(g.copy())
    return dirs


def solve_dual(sys: AlgebraicSystem, pot: AuxPotential, z0=None,
               options: SolverOptions | None = None, rng=None) -> DualSolveReport:
    """Newton iteration with line search for a critical point of ``S_H``.

    Steps are accepted when they reduce the dual gradient norm ``|A(x_H(z))|``.
    A plateau of that norm above tolerance is reported as stagnation, which for
    linear systems means the right-hand side lies outside the column space.
    """
    opt = options or SolverOptions()
    rng = rng if rng is not None else np.random.default_rng(opt.seed)
    kw = dict(tol=opt.tol_inner, max_iter=opt.max_inner, require_convex=opt.require_convex)
    z = np.zeros(sys.N) if z0 is None else np.asarray(z0, dtype=float).copy()

    try:
        dtp = dtp_solve(sys, pot, z, **kw)
    except (NonConvexInner, MaxInnerIterations) as exc:
        log.info("DtP failed at z0 (%s); retrying with jitter", exc)
        z = z + opt.jitter * rng.standard_normal(sys.N)
        try:
            dtp = dtp_solve(sys, pot, z, **kw)
        except (NonConvexInner, MaxInnerIterations):
            return DualSolveReport(z, pot.base.copy(), np.inf, 0, Status.DTP_FAILURE)

    g = dtp.residual
    gn = float(np.linalg.norm(g))
    inner_max = dtp.inner_residual_norm
    history = [gn]
    plateau = 0
    for k in range(opt.max_outer):
        if gn <= opt.tol_outer:
            return DualSolveReport(z, dtp.x, gn, k, Status.CONVERGED, inner_max, history)
        Hs = dual_hessian(sys, pot, z, dtp, require_convex=opt.require_convex)
        accepted = None
        for d in _ascent_directions(Hs, g):
            t = 1.0
            for _ in range(40):
                zt = z + t * d
                try:
                    trial = dtp_solve(sys, pot, zt, x0=dtp.x, **kw)
                except (NonConvexInner, MaxInnerIterations):
                    try:
                        trial = dtp_solve(sys, pot, zt, **kw)
                    except (NonConvexInner, MaxInnerIterations):
                        t *= 0.5
                        continue
                gt = float(np.linalg.norm(trial.residual))
                if gt <= (1 - 1e-4 * t) * gn:
                    accepted = (zt, trial, gt)
                    break
                t *= 0.5
            if accepted is not None:
                break
        if accepted is None:
            return DualSolveReport(z, dtp.x, gn, k, Status.STAGNATION, inner_max, history)
        z, dtp, gnew = accepted
        g = dtp.residual
        inner_max = max(inner_max, dtp.inner_residual_norm)
        plateau = plateau + 1 if gnew > (1 - 1e-3) * gn else 0
        gn = gnew
        history.append(gn)
        if plateau >= 8 and gn > opt.tol_outer:
            return DualSolveReport(z, dtp.x, gn, k + 1, Status.STAGNATION, inner_max, history)
    status = Status.CONVERGED if gn <= opt.tol_outer else Status.MAX_ITER
    return DualSolveReport(z, dtp.x, gn, opt.max_outer, status, inner_max, history)


def base_state_continuation(sys: AlgebraicSystem, pot: AuxPotential, rounds: int = 3,
                            options: SolverOptions | None = None, rng=None) -> DualSolveReport:
    """Repeat :func:`solve_dual`, moving the base state to each recovered primal.

    A round is accepted only if it does not increase the dual gradient norm
    relative to the residual of the current base state.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    opt = options or SolverOptions()
    rng = rng if rng is not None else np.random.default_rng(opt.seed)
    current = pot
    best = None
    base_norm = float(np.linalg.norm(sys.residual(current.base)))
    for r in range(rounds):
        rep = solve_dual(sys, current, np.zeros(sys.N), opt, rng)
        rep.history = list(rep.history)
        if best is not None and rep.dual_gradient_norm > min(best.dual_gradient_norm, base_norm):
            log.info("continuation round %d rejected (|g|=%.3e)", r, rep.dual_gradient_norm)
            break
        best = rep
        if rep.status is Status.DTP_FAILURE:
            break
        current = current.with_base(rep.primal)
        base_norm = float(np.linalg.norm(sys.residual(current.base)))
        if rep.converged and rep.outer_iterations == 0:
            break
    return best
