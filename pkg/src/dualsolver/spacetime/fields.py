"""Space-time auxiliary potential and nodal dual field."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .grid import SpaceTimeGrid
from .systems import DualBC


@dataclass
class PdeAuxPotential:
    """H(U, x, t) = 1/2 sum a_i d_i^2 + sum_g (b_g/p)|d_g|^p with d = U - Ubar(x, t)."""
    a: np.ndarray
    b: np.ndarray
    p: float
    base: Callable
    groups: np.ndarray | None = None

    def __post_init__(self):
        self.a = np.atleast_1d(np.asarray(self.a, dtype=float))
        self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
        self.p = float(self.p)
        n = max(self.a.size, self.b.size)
        self.a = np.broadcast_to(self.a, (n,)).copy()
        self.b = np.broadcast_to(self.b, (n,)).copy()
        if np.any(self.a < 0) or np.any(self.b < 0):
            raise ValueError("potential weights must be nonnegative")
        if not self.p > 2:
            raise ValueError(f"power p must exceed 2, got {self.p}")
        if np.any((self.a <= 0) & (self.b <= 0)):
            raise ValueError("every component needs a positive weight")
        self._labels = (np.zeros(n, dtype=int) if self.groups is None
                        else np.asarray(self.groups, dtype=int).ravel())
        for g in np.unique(self._labels):
            if np.ptp(self.b[self._labels == g]) != 0:
                raise ValueError(f"power-law weight must be constant within group {g}")

    @classmethod
    def quadratic(cls, base, a=1.0, n=1):
        a = np.broadcast_to(np.asarray(a, dtype=float), (max(n, np.size(a)),))
        return cls(a=a, b=0.0, p=4.0, base=base)

    def sample(self, x, t):
        """Base field at points, shape (P, N)."""
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.asarray(self.base(x, t), dtype=float)
        return np.broadcast_to(out, x.shape + (self.a.size,)).copy()

    def _groups(self):
        return [(self._labels == g, self.b[self._labels == g][0])
                for g in np.unique(self._labels)]

    def value(self, U, Ubar):
        d = U - Ubar
        v = 0.5 * np.einsum("i,pi,pi->p", self.a, d, d)
        for m, bg in self._groups():
            if bg:
                v += bg / self.p * np.linalg.norm(d[:, m], axis=1) ** self.p
        return v

    def grad(self, U, Ubar):
        d = U - Ubar
        out = self.a * d
        for m, bg in self._groups():
            if bg:
                r = np.linalg.norm(d[:, m], axis=1)
                out[:, m] += bg * (r ** (self.p - 2))[:, None] * d[:, m]
        return out

    def hess(self, U, Ubar):
        d = U - Ubar
        P, n = d.shape
        out = np.zeros((P, n, n))
        out[:, np.arange(n), np.arange(n)] = self.a
        for m, bg in self._groups():
            if not bg:
                continue
            idx = np.flatnonzero(m)
            dm = d[:, idx]
            r = np.linalg.norm(dm, axis=1)
            rp = np.where(r > 0, r, 1.0)
            c2 = np.where(r > 0, (self.p - 2) * rp ** (self.p - 4), 0.0)
            blk = (bg * (r ** (self.p - 2))[:, None, None] * np.eye(idx.size)
                   + bg * c2[:, None, None] * dm[:, :, None] * dm[:, None, :])
            out[:, idx[:, None], idx[None, :]] += blk
        return out


@dataclass
class DualFieldState:
    """Nodal dual values ``D (n_nodes, N*)`` with a pinned mask."""
    grid: SpaceTimeGrid
    D: np.ndarray
    mask: np.ndarray
    pinned_values: np.ndarray = field(repr=False, default=None)

    @classmethod
    def from_bc(cls, grid, Nstar, dual_bc: DualBC, zero_pins=False):
        D = np.zeros((grid.n_nodes, Nstar))
        mask = np.zeros_like(D, dtype=bool)
        nodes = grid.nodes
        for side, rows in dual_bc.pins.items():
            ids = grid.boundary_nodes(side)
            for g in rows:
                mask[ids, g] = True
                if not zero_pins:
                    D[ids, g] = dual_bc.value(g, side, nodes[ids, 0], nodes[ids, 1])
        return cls(grid, D, mask, D[mask].copy())

    @property
    def Nstar(self):
        return self.D.shape[1]

    @property
    def free(self):
        return np.flatnonzero(~self.mask.ravel())

    def copy(self):
        return DualFieldState(self.grid, self.D.copy(), self.mask.copy(),
                              None if self.pinned_values is None else self.pinned_values.copy())

    def set_free(self, values):
        flat = self.D.reshape(-1)
        flat[self.free] = values

    def pins_intact(self):
        return self.pinned_values is None or np.array_equal(self.D[self.mask], self.pinned_values)

    def local(self):
        """(dD/dt, dD/dx, D) at quadrature points, shape (nel, nq, 3, N*)."""
        De = self.D[self.grid.elements]
        return kernels.interpolate(self.grid.shape_ops, De)
