"""Primal layouts, dual point values and the auxiliary potential."""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

_SHAPES = {"y": (3,), "v": (3,), "F": (3, 3), "P": (3, 3)}
PRIMAL_BLOCKS = {"rd": ("y", "v", "F", "P", "g"), "ri": ("y", "F", "P", "g", "r", "s", "p")}
DUAL_FIELDS = {
    "rd": ("dt_gamma", "grad_gamma", "dt_Pi", "Pi", "dt_Gamma", "Gamma",
           "dt_xi", "xi", "div_Phi", "Phi"),
    "ri": ("grad_gamma", "dt_Pi", "Pi", "div_Phi", "Phi", "rho", "mu", "nu",
           "dt_Gamma", "Gamma"),
}
_DUAL_SHAPES = {"dt_gamma": (3,), "grad_gamma": (3, 3), "dt_Pi": (3, 3), "Pi": (3, 3),
                "dt_xi": (3,), "xi": (3,), "div_Phi": (3,), "Phi": (3, 3)}
SLIP_DUALS = ("rho", "mu", "nu", "dt_Gamma", "Gamma")


@dataclass(frozen=True)
class Layout:
    kind: str
    nslip: int

    def __post_init__(self):
        if self.kind not in PRIMAL_BLOCKS:
            raise ValueError(f"unknown model kind {self.kind!r}")

    def shape(self, block):
        return _SHAPES.get(block, (self.nslip,))

    @property
    def blocks(self):
        return PRIMAL_BLOCKS[self.kind]

    @functools.cached_property
    def slices(self):
        out, start = {}, 0
        for b in self.blocks:
            size = int(np.prod(self.shape(b)))
            out[b] = slice(start, start + size)
            start += size
        return out

    @functools.cached_property
    def size(self):
        return sum(int(np.prod(self.shape(b))) for b in self.blocks)

    def unpack(self, U):
        """Dict of batched blocks from U of shape (B, n)."""
        U = np.atleast_2d(U)
        return {b: U[:, s].reshape((U.shape[0],) + self.shape(b)) for b, s in self.slices.items()}

    def pack(self, **blocks):
        first = np.asarray(next(iter(blocks.values())))
        batched = first.ndim > len(self.shape(next(iter(blocks))))
        parts = []
        for b in self.blocks:
            v = np.asarray(blocks[b], dtype=float)
            parts.append(v.reshape((v.shape[0], -1)) if batched else v.reshape(-1))
        return np.concatenate(parts, axis=-1)

    def block_of(self, index):
        for b, s in self.slices.items():
            if s.start <= index < s.stop:
                return b
        raise IndexError(index)

    def permutation(self, order):
        """Index map on U for relabeling slip systems."""
        idx = np.arange(self.size)
        order = np.asarray(order)
        for b in self.blocks:
            if b not in _SHAPES:
                s = self.slices[b]
                idx[s] = s.start + order
        return idx


@dataclass
class DualPointValue:
    kind: str
    nslip: int
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        names = DUAL_FIELDS[self.kind]
        extra = set(self.values) - set(names)
        if extra:
            raise ValueError(f"unknown dual fields {sorted(extra)} for {self.kind}")
        full = {}
        for k in names:
            shape = _DUAL_SHAPES.get(k, (self.nslip,))
            v = np.asarray(self.values.get(k, np.zeros(shape)), dtype=float)
            if v.shape != shape:
                raise ValueError(f"dual field {k} must have shape {shape}, got {v.shape}")
            full[k] = v
        self.values = full

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def zeros(cls, kind, nslip):
        return cls(kind, nslip)

    @classmethod
    def from_flat(cls, kind, nslip, flat):
        flat = np.asarray(flat, dtype=float)
        vals, start = {}, 0
        for k in DUAL_FIELDS[kind]:
            shape = _DUAL_SHAPES.get(k, (nslip,))
            size = int(np.prod(shape))
            vals[k] = flat[start:start + size].reshape(shape)
            start += size
        if start != flat.size:
            raise ValueError("flat dual array has the wrong length")
        return cls(kind, nslip, vals)

    @classmethod
    def random(cls, kind, nslip, rng, scale):
        """Uniform direction, norm uniform in [0, scale]."""
        size = cls.zeros(kind, nslip).flat().size
        d = rng.standard_normal(size)
        d *= scale * rng.uniform() / np.linalg.norm(d)
        return cls.from_flat(kind, nslip, d)

    def flat(self):
        return np.concatenate([self.values[k].ravel() for k in DUAL_FIELDS[self.kind]])

    def norm(self):
        return float(np.linalg.norm(self.flat()))

    def replace(self, **kw):
        vals = dict(self.values)
        vals.update(kw)
        return DualPointValue(self.kind, self.nslip, vals)

    def permuted(self, order):
        order = np.asarray(order)
        return self.replace(**{k: self.values[k][order] for k in SLIP_DUALS
                               if k in self.values})


_A_DEFAULT = 10.0


@dataclass
class PlasticAuxPotential:
    """Blockwise H: 1/2 sum a_k |U_k - Ubar_k|^2 + sum (b_k/p) |U_k - Ubar_k|^p."""
    layout: Layout
    base: np.ndarray
    a: dict = field(default_factory=dict)
    b: dict = field(default_factory=dict)
    p: float = 4.0

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float).ravel()
        if self.base.size != self.layout.size:
            raise ValueError(f"base has {self.base.size} entries, layout needs {self.layout.size}")
        unknown = (set(self.a) | set(self.b)) - set(self.layout.blocks)
        if unknown:
            raise ValueError(f"weights for unknown blocks {sorted(unknown)}")
        self.a = {k: float(self.a.get(k, _A_DEFAULT)) for k in self.layout.blocks}
        self.b = {k: float(self.b.get(k, 0.0)) for k in self.layout.blocks}
        self.p = float(self.p)
        if not self.p > 2:
            raise ValueError("power p must exceed 2")
        for k in self.layout.blocks:
            if self.a[k] < 0 or self.b[k] < 0:
                raise ValueError(f"negative weight on block {k}")
            if self.a[k] == 0 and self.b[k] == 0:
                raise ValueError(f"block {k} has no positive weight")

    def with_base(self, base):
        return PlasticAuxPotential(self.layout, base, dict(self.a), dict(self.b), self.p)

    def scaled(self, factor, blocks=None):
        blocks = self.layout.blocks if blocks is None else blocks
        a = {k: v * (factor if k in blocks else 1.0) for k, v in self.a.items()}
        return PlasticAuxPotential(self.layout, self.base, a, dict(self.b), self.p)

    @property
    def a_vector(self):
        out = np.empty(self.layout.size)
        for k, s in self.layout.slices.items():
            out[s] = self.a[k]
        return out

    def value(self, U):
        U = np.atleast_2d(U)
        d = U - self.base
        v = 0.5 * (d * d) @ self.a_vector
        for k, s in self.layout.slices.items():
            if self.b[k]:
                v = v + self.b[k] / self.p * np.linalg.norm(d[:, s], axis=1) ** self.p
        return v

    def grad(self, U):
        U = np.atleast_2d(U)
        d = U - self.base
        g = d * self.a_vector
        for k, s in self.layout.slices.items():
            if self.b[k]:
                r = np.linalg.norm(d[:, s], axis=1)
                g[:, s] += self.b[k] * (r ** (self.p - 2))[:, None] * d[:, s]
        return g

    def hess(self, U):
        """Single-state Hessian (n, n)."""
        d = np.asarray(U, dtype=float).ravel() - self.base
        H = np.diag(self.a_vector)
        for k, s in self.layout.slices.items():
            if self.b[k]:
                dk = d[s]
                r = np.linalg.norm(dk)
                if r > 0:
                    H[s, s] += self.b[k] * (r ** (self.p - 2) * np.eye(dk.size)
                                            + (self.p - 2) * r ** (self.p - 4) * np.outer(dk, dk))
        return H
