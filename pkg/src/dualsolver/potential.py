"""Shifted quadratic plus power-law auxiliary potential.

    H(x) = 1/2 sum_i a_i (x_i - xb_i)^2 + sum_g (b_g / p) |x_g - xb_g|^p

where ``g`` runs over component groups (a single group by default, so the
power-law term uses the Euclidean norm of the whole deviation).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AuxPotential:
    a: np.ndarray
    b: np.ndarray
    p: float
    base: np.ndarray
    groups: np.ndarray | None = None
    _labels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.base = np.asarray(self.base, dtype=float).ravel()
        n = self.base.size
        self.a = np.broadcast_to(np.asarray(self.a, dtype=float), (n,)).copy()
        self.b = np.broadcast_to(np.asarray(self.b, dtype=float), (n,)).copy()
        self.p = float(self.p)
        if np.any(self.a < 0) or np.any(self.b < 0):
            raise ValueError("potential weights must be nonnegative")
        if not self.p > 2:
            raise ValueError(f"power p must exceed 2, got {self.p}")
        if np.any((self.a <= 0) & (self.b <= 0)):
            raise ValueError("every component needs a positive quadratic or power-law weight")
        if self.groups is None:
            self._labels = np.zeros(n, dtype=int)
        else:
            self._labels = np.asarray(self.groups, dtype=int).ravel()
            if self._labels.size != n:
                raise ValueError("groups must label every component")
        for g in np.unique(self._labels):
            bg = self.b[self._labels == g]
            if np.ptp(bg) != 0:
                raise ValueError(f"power-law weight must be constant within group {g}")

    @classmethod
    def quadratic(cls, base, a=1.0):
        return cls(a=a, b=0.0, p=4.0, base=base)

    @property
    def n(self):
        return self.base.size

    def with_base(self, base):
        return AuxPotential(self.a, self.b, self.p, np.asarray(base, dtype=float),
                            None if self.groups is None else self._labels.copy())

    def _group_norms(self, d):
        return {g: np.linalg.norm(d[self._labels == g]) for g in np.unique(self._labels)}

    def value(self, x):
        d = np.asarray(x, dtype=float) - self.base
        val = 0.5 * np.dot(self.a * d, d)
        for g, r in self._group_norms(d).items():
            bg = self.b[self._labels == g][0]
            if bg:
                val += bg / self.p * r**self.p
        return float(val)

    def grad(self, x):
        d = np.asarray(x, dtype=float) - self.base
        out = self.a * d
        if np.any(self.b):
            for g, r in self._group_norms(d).items():
                m = self._labels == g
                out[m] += self.b[m] * r ** (self.p - 2) * d[m]
        return out

    def hess(self, x):
        d = np.asarray(x, dtype=float) - self.base
        out = np.diag(self.a)
        if np.any(self.b):
            for g, r in self._group_norms(d).items():
                m = np.flatnonzero(self._labels == g)
                bg = self.b[m[0]]
                if not bg or r == 0.0:
                    continue
                dm = d[m]
                block = bg * (r ** (self.p - 2) * np.eye(m.size)
                              + (self.p - 2) * r ** (self.p - 4) * np.outer(dm, dm))
                out[np.ix_(m, m)] += block
        return out
