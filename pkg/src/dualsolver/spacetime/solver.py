"""Discrete dual functional on a space-time grid and its Newton solver.

    S_H[D] = sum_e sum_q w_q L_H(U_H(Dq), Dq, x_q, t_q)
             - int C U0(x) D(x, 0) dx + sum_G int B_G n D_G dt

By the envelope property the gradient only sees the explicit dependence of
L_H on (dD/dt, dD/dx, D); the Hessian is assembled from the pointwise blocks
``-Bc K^{-1} Bc^T`` with ``Bc = d^2L/dDdU``.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..core_dual import SolverOptions, Status
from ..errors import DualSolverError, MaxIterations, NonConvexInner
from . import kernels
from .dtp import coupling, dL_dD, dtp_batch, lagrangian
from .fields import DualFieldState, PdeAuxPotential
from .grid import SpaceTimeGrid
from .systems import LATERAL, DualBC, FirstOrderSystem

log = logging.getLogger(__name__)


@dataclass
class Evaluation:
    value: float
    gradient: np.ndarray
    hessian: sp.csr_matrix | None
    U: np.ndarray
    inner_iterations: int
    inner_residual: float
    inner_min_eig: float


@dataclass
class RecoveredPrimal:
    """Primal field at quadrature points, arrays of shape (nel, nq[, N])."""
    x: np.ndarray
    t: np.ndarray
    U: np.ndarray
    weights: np.ndarray

    def l2_error(self, exact, component=0):
        ue = np.asarray(exact(self.x, self.t))[..., component]
        d = self.U[..., component] - ue
        return float(np.sqrt(np.sum(self.weights * d * d)))


@dataclass
class SpaceTimeReport:
    status: Status
    iterations: int
    gradient_norm: float
    weak_residual_norm: float
    D_inf: float
    inner_residual_max: float
    inner_min_eig: float
    backend: str
    history: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status == Status.CONVERGED


class DiscreteDual:
    """Precomputed quadrature data for one (system, potential, grid, closure)."""

    def __init__(self, sys: FirstOrderSystem, pot: PdeAuxPotential, grid: SpaceTimeGrid,
                 dual_bc: DualBC | None = None, options: SolverOptions | None = None):
        self.sys, self.pot, self.grid = sys, pot, grid
        self.dual_bc = sys.dual_bc if dual_bc is None else dual_bc
        sys.validate(self.dual_bc)
        self.options = options or SolverOptions()
        ns = sys.Nstar
        self.ndof = grid.n_nodes * ns
        self.dofmap = grid.dof_map(ns)
        m = self.dofmap.shape[1]
        self._rows = np.repeat(self.dofmap, m, axis=1).ravel()
        self._cols = np.tile(self.dofmap, (1, m)).ravel()
        self.xp = grid.xq.ravel()
        self.tp = grid.tq.ravel()
        self.Ubar = pot.sample(self.xp, self.tp)
        self.linear = self._linear_functional()

    def _linear_functional(self):
        """Initial-data and boundary-flux terms as a nodal vector."""
        g, sys, ns = self.grid, self.sys, self.sys.Nstar
        f = np.zeros((g.n_nodes, ns))
        segs, coord, w, shape = g.edge_quadrature("initial")
        CU0 = sys.U0(coord.ravel()) @ sys.C.T
        CU0 = CU0.reshape(coord.shape + (ns,))
        contrib = -np.einsum("q,qk,sqg->skg", w, shape, CU0)
        np.add.at(f, segs, contrib)
        for (row, side), _ in sorted(sys.bflux.items()):
            segs, tq, w, shape = g.edge_quadrature(side)
            xb = np.full(tq.shape, g.x_min if side == "left" else g.x_max)
            B = sys.boundary_flux(row, side, xb, tq)
            contrib = LATERAL[side] * np.einsum("q,qk,sq->sk", w, shape, B)
            np.add.at(f[:, row], segs, contrib)
        return f.ravel()

    def new_state(self, zero_pins=False):
        return DualFieldState.from_bc(self.grid, self.sys.Nstar, self.dual_bc, zero_pins)

    def _locate(self, exc):
        loc = exc.location
        if isinstance(loc, (int, np.integer)):
            e, q = divmod(int(loc), self.grid.nq)
            exc.location = self.grid.element_of_point(e, q)
        return exc

    def evaluate(self, state: DualFieldState, hessian=True, U0=None):
        g, sys = self.grid, self.sys
        nel, nq, ns = g.n_elements, g.nq, sys.Nstar
        Dl = state.local().reshape(nel * nq, 3, ns)
        opts = self.options
        try:
            res = dtp_batch(sys, self.pot, Dl, self.xp, self.tp, self.Ubar,
                            tol=opts.tol_inner, max_iter=opts.max_inner, U0=U0)
        except (NonConvexInner, MaxIterations) as exc:
            raise self._locate(exc)
        U = res.U
        L = lagrangian(sys, self.pot, U, Dl, self.xp, self.tp, self.Ubar)
        D = state.D.ravel()
        value = float(np.sum(g.weights * L.reshape(nel, nq)) + self.linear @ D)
        dL = dL_dD(sys, U, self.xp, self.tp).reshape(nel, nq, 3, ns)
        ge = kernels.element_gradient(g.shape_ops, g.weights, dL)
        grad = kernels.scatter_add(self.dofmap, ge.reshape(nel, -1), self.ndof) + self.linear
        H = None
        if hessian:
            Bc = coupling(sys, U, self.xp, self.tp)
            KiBt = np.linalg.solve(res.K, np.transpose(Bc, (0, 2, 1)))
            Hp = -np.einsum("pai,pib->pab", Bc, KiBt)
            Hp = 0.5 * (Hp + np.transpose(Hp, (0, 2, 1)))
            He = kernels.element_hessian(g.shape_ops, g.weights, Hp.reshape(nel, nq, 3 * ns, 3 * ns))
            H = sp.csr_matrix((He.ravel(), (self._rows, self._cols)), shape=(self.ndof, self.ndof))
        return Evaluation(value, grad, H, U.reshape(nel, nq, -1), res.iterations,
                          res.residual_max, res.min_eig)

    def primal(self, U):
        return RecoveredPrimal(self.grid.xq, self.grid.tq, U, self.grid.weights[None, :]
                               * np.ones((self.grid.n_elements, 1)))


def assemble_dual_gradient(sys, pot, state, dual_bc=None, free_only=True):
    """Gradient of the discrete S_H w.r.t. nodal D (unpinned entries by default)."""
    dd = DiscreteDual(sys, pot, state.grid, dual_bc)
    grad = dd.evaluate(state, hessian=False).gradient
    return grad[state.free] if free_only else grad


def discrete_objective(sys, pot, state, dual_bc=None):
    return DiscreteDual(sys, pot, state.grid, dual_bc).evaluate(state, hessian=False).value


def consistency_residual(sys, pot, grid, dual_bc=None):
    """Norm of the free gradient at D = 0: the weak residual of the base field."""
    dd = DiscreteDual(sys, pot, grid, dual_bc)
    state = dd.new_state(zero_pins=True)
    return float(np.linalg.norm(dd.evaluate(state, hessian=False).gradient[state.free]))


def solve_dual_field(sys, pot, grid, dual_bc=None, options=None, D0=None):
    """Newton iteration with a gradient-norm line search.

    Returns ``(state, primal, report)``; ``primal`` holds U_H at quadrature points.
    """
    opts = options or SolverOptions()
    dd = DiscreteDual(sys, pot, grid, dual_bc, opts)
    state = dd.new_state()
    if D0 is not None:
        state.set_free(np.asarray(D0, dtype=float).reshape(-1)[state.free])
    free = state.free
    ev = dd.evaluate(state)
    gn = float(np.linalg.norm(ev.gradient[free]))
    history = [gn]
    status = Status.MAX_ITER
    slow = 0
    it = 0
    for it in range(opts.max_outer + 1):
        if gn <= opts.tol_outer:
            status = Status.CONVERGED
            break
        if it == opts.max_outer:
            break
        gf = ev.gradient[free]
        Hff = ev.hessian[free][:, free].tocsc()
        try:
            step = spla.spsolve(Hff, -gf)
            if not np.all(np.isfinite(step)):
                raise np.linalg.LinAlgError("non-finite Newton step")
        except (RuntimeError, np.linalg.LinAlgError):
            step = gf.copy()
        slope = float(gf @ step)
        if slope < 0:  # not an ascent direction for the concave functional
            step = gf.copy()
            slope = float(gf @ gf)
        s = 1.0
        accepted = None
        base = state.D.reshape(-1)[free].copy()
        for _ in range(30):
            trial = state.copy()
            trial.set_free(base + s * step)
            try:
                tev = dd.evaluate(trial, U0=ev.U.reshape(-1, sys.N))
            except DualSolverError:
                s *= 0.5
                continue
            tg = float(np.linalg.norm(tev.gradient[free]))
            if tg < (1 - 1e-4 * s) * gn or tev.value >= ev.value + 1e-4 * s * slope and tg < gn:
                accepted = (trial, tev, tg)
                break
            s *= 0.5
        if accepted is None:
            status = Status.STAGNATION
            break
        state, ev, new = accepted
        slow = slow + 1 if new > 0.999 * gn else 0
        gn = new
        history.append(gn)
        log.debug("dual field iteration %d: |g| = %.3e, step %.3g", it, gn, s)
        if slow >= 8:
            status = Status.STAGNATION
            break
    assert state.pins_intact()
    report = SpaceTimeReport(status, it, gn, gn, float(np.abs(state.D).max()),
                             ev.inner_residual, ev.inner_min_eig, kernels.BACKEND, history)
    return state, dd.primal(ev.U), report


def project_to_nodes(grid, Uq):
    """L2 projection of a quadrature field (nel, nq, N) onto bilinear nodal values."""
    ops = grid.shape_ops[:, 2, :]
    nel, nq, n = Uq.shape
    Me = np.einsum("q,qa,qb->ab", grid.weights, ops, ops)
    rows = np.repeat(grid.elements, 4, axis=1).ravel()
    cols = np.tile(grid.elements, (1, 4)).ravel()
    M = sp.csr_matrix((np.tile(Me.ravel(), nel), (rows, cols)), shape=(grid.n_nodes,) * 2)
    rhs = np.zeros((grid.n_nodes, n))
    np.add.at(rhs, grid.elements, np.einsum("q,qa,eqn->ean", grid.weights, ops, Uq))
    solve = spla.factorized(M.tocsc())
    return np.column_stack([solve(rhs[:, k]) for k in range(n)])


def write_field_csv(path, x, t, values, names=None):
    """CSV with columns x, t, then one column per component."""
    x = np.asarray(x).ravel()
    t = np.asarray(t).ravel()
    V = np.asarray(values).reshape(x.size, -1)
    names = names or [f"U{k}" for k in range(V.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", *names])
        for i in range(x.size):
            w.writerow([repr(float(x[i])), repr(float(t[i])), *(repr(float(v)) for v in V[i])])


def export_primal_csv(path, primal: RecoveredPrimal):
    write_field_csv(path, primal.x, primal.t, primal.U)


def export_dual_csv(path, state: DualFieldState):
    nodes = state.grid.nodes
    write_field_csv(path, nodes[:, 0], nodes[:, 1], state.D,
                    [f"D{k}" for k in range(state.Nstar)])
