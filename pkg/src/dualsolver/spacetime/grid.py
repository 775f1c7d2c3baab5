"""Uniform bilinear quadrilateral mesh of (x_min, x_max) x (0, T)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# reference node order: (-1,-1), (1,-1), (1,1), (-1,1) in (xi, eta) = (x, t)
_REF = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def _shape(xi, eta):
    N = 0.25 * (1 + _REF[:, 0] * xi) * (1 + _REF[:, 1] * eta)
    dxi = 0.25 * _REF[:, 0] * (1 + _REF[:, 1] * eta)
    deta = 0.25 * _REF[:, 1] * (1 + _REF[:, 0] * xi)
    return N, dxi, deta


@dataclass
class SpaceTimeGrid:
    x_min: float
    x_max: float
    T: float
    nx: int
    nt: int
    quad_order: int = 2
    shape_ops: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.nx < 1 or self.nt < 1:
            raise ValueError("nx and nt must be positive")
        if not (self.x_max > self.x_min and self.T > 0):
            raise ValueError("empty space-time domain")
        self.hx = (self.x_max - self.x_min) / self.nx
        self.ht = self.T / self.nt
        g, w = np.polynomial.legendre.leggauss(self.quad_order)
        xi, eta = np.meshgrid(g, g, indexing="xy")
        self.ref_points = np.column_stack([xi.ravel(), eta.ravel()])
        wq = np.outer(w, w).ravel()
        nq = wq.size
        # shape_ops[q, k, a]: k = 0 d/dt, 1 d/dx, 2 value
        ops = np.empty((nq, 3, 4))
        for q, (s, e) in enumerate(self.ref_points):
            N, dxi, deta = _shape(s, e)
            ops[q, 0] = deta * 2.0 / self.ht
            ops[q, 1] = dxi * 2.0 / self.hx
            ops[q, 2] = N
        self.shape_ops = ops
        self.weights = wq * self.hx * self.ht / 4.0
        self._edge_g, self._edge_w = g, w

        i, j = np.meshgrid(np.arange(self.nx), np.arange(self.nt), indexing="xy")
        i, j = i.ravel(), j.ravel()
        n0 = j * (self.nx + 1) + i
        self.elements = np.column_stack([n0, n0 + 1, n0 + self.nx + 2, n0 + self.nx + 1])
        self._elem_ij = np.column_stack([i, j])
        xs = self.x_min + (i[:, None] + 0.5 * (1 + self.ref_points[None, :, 0])) * self.hx
        ts = (j[:, None] + 0.5 * (1 + self.ref_points[None, :, 1])) * self.ht
        self.xq, self.tq = xs, ts

    @property
    def n_nodes(self):
        return (self.nx + 1) * (self.nt + 1)

    @property
    def n_elements(self):
        return self.nx * self.nt

    @property
    def nq(self):
        return self.weights.size

    @property
    def nodes(self):
        x = np.linspace(self.x_min, self.x_max, self.nx + 1)
        t = np.linspace(0.0, self.T, self.nt + 1)
        X, Tt = np.meshgrid(x, t, indexing="xy")
        return np.column_stack([X.ravel(), Tt.ravel()])

    def node_index(self, i, j):
        return j * (self.nx + 1) + i

    def boundary_nodes(self, side):
        nx, nt = self.nx, self.nt
        if side == "initial":
            return np.arange(nx + 1)
        if side == "final":
            return nt * (nx + 1) + np.arange(nx + 1)
        if side == "left":
            return np.arange(nt + 1) * (nx + 1)
        if side == "right":
            return np.arange(nt + 1) * (nx + 1) + nx
        raise ValueError(f"unknown boundary side {side!r}")

    def edge_quadrature(self, side):
        """Gauss points on a boundary side.

        Returns ``(nodes (nseg, 2), coord (nseg, nq), weights (nq,) scaled,
        shape (nq, 2))`` where ``shape[q, k]`` is the 1-D hat function of the
        k-th segment node at point q and ``coord`` is the running coordinate
        (x on initial/final, t on left/right).
        """
        g, w = self._edge_g, self._edge_w
        shape = np.column_stack([0.5 * (1 - g), 0.5 * (1 + g)])
        if side in ("initial", "final"):
            nodes = self.boundary_nodes(side)
            segs = np.column_stack([nodes[:-1], nodes[1:]])
            left = self.x_min + np.arange(self.nx) * self.hx
            coord = left[:, None] + 0.5 * (1 + g)[None, :] * self.hx
            return segs, coord, w * self.hx / 2, shape
        nodes = self.boundary_nodes(side)
        segs = np.column_stack([nodes[:-1], nodes[1:]])
        start = np.arange(self.nt) * self.ht
        coord = start[:, None] + 0.5 * (1 + g)[None, :] * self.ht
        return segs, coord, w * self.ht / 2, shape

    def dof_map(self, ncomp):
        """(nel, 4*ncomp) global dof indices, node-major then component."""
        e = self.elements[:, :, None] * ncomp + np.arange(ncomp)[None, None, :]
        return e.reshape(self.n_elements, 4 * ncomp)

    def element_of_point(self, e, q):
        i, j = self._elem_ij[e]
        return dict(element=int(e), i=int(i), j=int(j), x=float(self.xq[e, q]),
                    t=float(self.tq[e, q]))
