"""First-order primal systems in one space dimension.

    C dU/dt + d/dx F(U) + G(U, x, t) = 0     in (x_min, x_max) x (0, T)
    C U(x, 0) = C U0(x)
    F_G(U) n = B_G n                          on flux segments of row G

All callables are vectorized over a leading point axis: ``U`` has shape
``(P, N)``, ``x`` and ``t`` shape ``(P,)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dirichlet import encode_dirichlet

SIDES = ("initial", "final", "left", "right")
LATERAL = {"left": -1.0, "right": 1.0}


@dataclass
class DualBC:
    """Dual Dirichlet closure: ``pins[side]`` lists pinned rows on that side.

    ``values[(row, side)]`` is a constant or ``f(x, t)``; missing entries are 0.
    """
    pins: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        for side in self.pins:
            if side not in SIDES:
                raise ValueError(f"unknown side {side!r}")
        self.pins = {s: tuple(int(g) for g in rows) for s, rows in self.pins.items()}

    def pinned(self, side, row):
        return row in self.pins.get(side, ())

    def value(self, row, side, x, t):
        v = self.values.get((row, side), 0.0)
        if callable(v):
            return np.broadcast_to(np.asarray(v(x, t), dtype=float), np.shape(x)).copy()
        return np.full(np.shape(x), float(v))


@dataclass
class FirstOrderSystem:
    N: int
    Nstar: int
    C: np.ndarray
    flux: Callable
    flux_jac: Callable
    flux_hess: Callable | None
    source: Callable
    source_jac: Callable
    source_hess: Callable | None
    U0: Callable
    bflux: dict = field(default_factory=dict)
    dual_bc: DualBC = field(default_factory=DualBC)
    aug_rows: tuple = ()
    aug_A: np.ndarray | None = None
    aug_B: np.ndarray | None = None
    exact: Callable | None = None
    name: str = "custom"

    def __post_init__(self):
        self.C = np.asarray(self.C, dtype=float).reshape(self.Nstar, self.N)
        for (row, side) in self.bflux:
            if side not in LATERAL:
                raise ValueError(f"flux data only on lateral sides, got {side!r}")
            if not 0 <= row < self.Nstar:
                raise ValueError(f"flux data for nonexistent row {row}")

    def flux_hessian(self, U):
        if self.flux_hess is None:
            return np.zeros((U.shape[0], self.Nstar, self.N, self.N))
        return self.flux_hess(U)

    def source_hessian(self, U, x, t):
        if self.source_hess is None:
            return np.zeros((U.shape[0], self.Nstar, self.N, self.N))
        return self.source_hess(U, x, t)

    def boundary_flux(self, row, side, x, t):
        f = self.bflux[(row, side)]
        if callable(f):
            return np.broadcast_to(np.asarray(f(x, t), dtype=float), np.shape(t)).copy()
        return np.full(np.shape(t), float(f))

    def closure_violations(self, dual_bc=None):
        """Rows lacking both flux data and a dual pin on some side."""
        bc = self.dual_bc if dual_bc is None else dual_bc
        out = []
        for g in range(self.Nstar):
            for side in LATERAL:
                if (g, side) not in self.bflux and not bc.pinned(side, g):
                    out.append((g, side))
            if np.any(self.C[g]) and not bc.pinned("final", g):
                out.append((g, "final"))
        return out

    def validate(self, dual_bc=None):
        bad = self.closure_violations(dual_bc)
        if bad:
            raise ValueError(f"rows without flux data or dual closure: {bad}")
        overlap = [(g, s) for (g, s) in self.bflux
                   if (dual_bc or self.dual_bc).pinned(s, g)]
        if overlap:
            raise ValueError(f"rows with both flux data and a dual pin: {overlap}")

    def augmentation_error(self, rng=None, samples=5):
        """Max deviation of augmentation rows from F = A U, G = -B U."""
        if not self.aug_rows:
            return 0.0
        rng = np.random.default_rng(rng)
        U = rng.standard_normal((samples, self.N))
        x = rng.uniform(size=samples)
        t = rng.uniform(size=samples)
        rows = list(self.aug_rows)
        F = self.flux(U)[:, rows]
        G = self.source(U, x, t)[:, rows]
        Fa = np.einsum("gi,pi->pg", self.aug_A[rows, :, 0], U)
        Ga = -np.einsum("gi,pi->pg", self.aug_B[rows], U)
        return float(max(np.abs(F - Fa).max(), np.abs(G - Ga).max()))


def _zeros_source(N, Nstar):
    def G(U, x, t):
        return np.zeros((U.shape[0], Nstar))

    def Gj(U, x, t):
        return np.zeros((U.shape[0], Nstar, N))
    return G, Gj


def transport(c=1.0, u0=None, x_min=0.0, x_max=1.0):
    """dU/dt + c dU/dx = 0 with inflow data from the characteristics solution."""
    c = float(c)
    if c == 0.0:
        raise ValueError("transport speed must be nonzero")
    if u0 is None:
        def u0(x):
            return np.sin(2 * np.pi * x)

    def exact(x, t):
        return u0(np.asarray(x) - c * np.asarray(t))[..., None]

    inflow, outflow = ("left", "right") if c > 0 else ("right", "left")
    xin = x_min if c > 0 else x_max
    G, Gj = _zeros_source(1, 1)
    return FirstOrderSystem(
        N=1, Nstar=1, C=[[1.0]],
        flux=lambda U: c * U,
        flux_jac=lambda U: np.full((U.shape[0], 1, 1), c),
        flux_hess=None,
        source=G, source_jac=Gj, source_hess=None,
        U0=lambda x: u0(np.asarray(x))[..., None],
        bflux={(0, inflow): lambda x, t: c * u0(xin - c * np.asarray(t))},
        dual_bc=DualBC(pins={"final": (0,), outflow: (0,)}),
        exact=exact, name="transport")


def burgers(u0=None, inflow=None, x_min=0.0, x_max=1.0):
    """dU/dt + d/dx (U^2 / 2) = 0 with left inflow; expects U > 0 near x_min."""
    if u0 is None:
        def u0(x):
            return 1.0 + 0.25 * np.sin(2 * np.pi * x)
    if inflow is None:
        ul = float(u0(np.array([x_min]))[0])

        def inflow(t):
            return np.full(np.shape(t), ul)
    G, Gj = _zeros_source(1, 1)
    return FirstOrderSystem(
        N=1, Nstar=1, C=[[1.0]],
        flux=lambda U: 0.5 * U**2,
        flux_jac=lambda U: U[:, :, None].copy(),
        flux_hess=lambda U: np.ones((U.shape[0], 1, 1, 1)),
        source=G, source_jac=Gj, source_hess=None,
        U0=lambda x: u0(np.asarray(x))[..., None],
        bflux={(0, "left"): lambda x, t: 0.5 * inflow(np.asarray(t)) ** 2},
        dual_bc=DualBC(pins={"final": (0,), "right": (0,)}),
        name="burgers")


def heat(kappa=1.0, x_min=0.0, x_max=1.0, mode=1):
    """Heat equation in first-order form, U = (u, q):

        du/dt - d/dx (kappa q) = 0,   du/dx - q = 0,

    with u0 = sin(mode pi x) and homogeneous Dirichlet data on u through the
    augmentation row.
    """
    kappa = float(kappa)
    L = x_max - x_min
    k = mode * np.pi / L

    def u0(x):
        return np.sin(k * (np.asarray(x) - x_min))

    def exact(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        decay = np.exp(-kappa * k**2 * t)
        return np.stack([decay * np.sin(k * (x - x_min)),
                         decay * k * np.cos(k * (x - x_min))], axis=-1)

    def flux(U):
        return np.column_stack([-kappa * U[:, 1], U[:, 0]])

    def flux_jac(U):
        J = np.zeros((U.shape[0], 2, 2))
        J[:, 0, 1] = -kappa
        J[:, 1, 0] = 1.0
        return J

    def source(U, x, t):
        return np.column_stack([np.zeros(U.shape[0]), -U[:, 1]])

    def source_jac(U, x, t):
        J = np.zeros((U.shape[0], 2, 2))
        J[:, 1, 1] = -1.0
        return J

    A = np.zeros((2, 2, 1))
    A[1, 0, 0] = 1.0
    B = np.zeros((2, 2))
    B[1, 1] = 1.0
    zero = np.zeros(2)
    b = encode_dirichlet(A, [1], zero, aug_rows=[1])[1, 0]
    return FirstOrderSystem(
        N=2, Nstar=2, C=[[1.0, 0.0], [0.0, 0.0]],
        flux=flux, flux_jac=flux_jac, flux_hess=None,
        source=source, source_jac=source_jac, source_hess=None,
        U0=lambda x: np.stack([u0(x), np.zeros(np.shape(x))], axis=-1),
        bflux={(1, "left"): b, (1, "right"): b},
        dual_bc=DualBC(pins={"final": (0,), "left": (0,), "right": (0,)}),
        aug_rows=(1,), aug_A=A, aug_B=B, exact=exact, name="heat")


BUILTINS = {"transport": transport, "heat": heat, "burgers": burgers}
