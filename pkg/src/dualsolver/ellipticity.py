"""Degenerate-ellipticity certification for conservation-with-source systems.

For ``d_alpha F_{G alpha}(U) + G_G(U, x) = 0`` and a shifted quadratic
potential with diagonal weights ``a``, the implicit DtP map is

    U = Ubar + a^{-1} (dF_{G alpha}/dU . d_alpha D_G - D_G dG_G/dU),

and the coefficient tensor of the dual Euler-Lagrange system is
``A = J M^{-1} a^{-1} J^T`` with ``J = dF/dU``.  Positive semi-definiteness of
its symmetrization on the full matrix space is what gets certified here.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import MaxIterations, MPDLoss

PSD_TOL = 1e-10


@dataclass
class ConservationSourceSystem:
    N: int
    Nstar: int
    alpha_dim: int
    flux: Callable            # U -> (Nstar, alpha_dim)
    flux_jac: Callable        # U -> (Nstar, alpha_dim, N)
    flux_hess: Callable       # U -> (Nstar, alpha_dim, N, N)
    a_diag: np.ndarray
    source: Callable | None = None        # (U, x) -> (Nstar,)
    source_jac: Callable | None = None    # (U, x) -> (Nstar, N)
    source_hess: Callable | None = None   # (U, x) -> (Nstar, N, N)
    name: str = "custom"

    def __post_init__(self):
        if self.alpha_dim not in (1, 2, 3, 4):
            raise ValueError("alpha_dim must be 1, 2, 3 or 4")
        self.a_diag = np.broadcast_to(np.asarray(self.a_diag, dtype=float), (self.N,)).copy()
        if np.any(self.a_diag <= 0):
            raise ValueError("a_diag entries must be positive")

    def with_weights(self, a_diag):
        kw = dict(self.__dict__)
        kw["a_diag"] = a_diag
        return ConservationSourceSystem(**kw)

    # zero source unless supplied
    def G(self, U, x=None):
        return np.zeros(self.Nstar) if self.source is None else np.asarray(self.source(U, x))

    def G_jac(self, U, x=None):
        if self.source_jac is None:
            return np.zeros((self.Nstar, self.N))
        return np.asarray(self.source_jac(U, x), dtype=float).reshape(self.Nstar, self.N)

    def G_hess(self, U, x=None):
        if self.source_hess is None:
            return np.zeros((self.Nstar, self.N, self.N))
        return np.asarray(self.source_hess(U, x), dtype=float).reshape(self.Nstar, self.N, self.N)

    def F_jac(self, U):
        return np.asarray(self.flux_jac(U), dtype=float).reshape(self.Nstar, self.alpha_dim, self.N)

    def F_hess(self, U):
        return np.asarray(self.flux_hess(U), dtype=float).reshape(
            self.Nstar, self.alpha_dim, self.N, self.N)


@dataclass
class EllipticityReport:
    M: np.ndarray
    M_min_eig: float
    A: np.ndarray
    A_sym: np.ndarray
    A_min_eig: float
    psd_certified: bool
    point: tuple
    U: np.ndarray = field(repr=False, default=None)
    error: str | None = None


@dataclass
class ScanResult:
    reports: list
    all_certified: bool

    @property
    def certified_fraction(self):
        return sum(r.psd_certified for r in self.reports) / max(len(self.reports), 1)

    @property
    def mpd_failures(self):
        return [i for i, r in enumerate(self.reports) if r.error is not None]


def _correction(sys, gradD, D, U):
    """``d_alpha D_G d2F_{G alpha}/dUdU - D_G d2G_G/dUdU``."""
    return (np.einsum("ga,gars->rs", gradD, sys.F_hess(U))
            - np.einsum("g,grs->rs", D, sys.G_hess(U)))


def compute_M(sys, gradD, D, U) -> np.ndarray:
    gradD = np.asarray(gradD, dtype=float).reshape(sys.Nstar, sys.alpha_dim)
    D = np.asarray(D, dtype=float).reshape(sys.Nstar)
    return np.eye(sys.N) - _correction(sys, gradD, D, U) / sys.a_diag[:, None]


def _sym_min_eig(M):
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def dtp_implicit(sys: ConservationSourceSystem, gradD, D, baseU, *, tol=1e-12,
                 max_iter=50) -> np.ndarray:
    """Solve the implicit DtP map by Newton; the Newton matrix is ``a M``."""
    gradD = np.asarray(gradD, dtype=float).reshape(sys.Nstar, sys.alpha_dim)
    D = np.asarray(D, dtype=float).reshape(sys.Nstar)
    baseU = np.asarray(baseU, dtype=float).reshape(sys.N)
    a = sys.a_diag
    U = baseU.copy()
    for _ in range(max_iter + 1):
        rhs = (np.einsum("gak,ga->k", sys.F_jac(U), gradD)
               - np.einsum("g,gk->k", D, sys.G_jac(U)))
        r = U - baseU - rhs / a
        if np.linalg.norm(r) <= tol * max(1.0, np.linalg.norm(U)):
            M = compute_M(sys, gradD, D, U)
            lam = _sym_min_eig(M)
            if lam <= 0:
                raise MPDLoss(f"M not positive definite at DtP point (min eig {lam:.3e})", lam)
            return U
        M = compute_M(sys, gradD, D, U)
        try:
            U = U - np.linalg.solve(M, r)
        except np.linalg.LinAlgError:
            raise MPDLoss("M singular during DtP iteration", 0.0) from None
        if not np.all(np.isfinite(U)):
            break
    M = compute_M(sys, gradD, D, U) if np.all(np.isfinite(U)) else np.full((sys.N, sys.N), np.nan)
    if not np.all(np.isfinite(M)) or _sym_min_eig(M) <= 0:
        raise MPDLoss("DtP iteration diverged with M indefinite")
    raise MaxIterations(f"implicit DtP did not converge in {max_iter} iterations")


def acoustic_tensor(sys: ConservationSourceSystem, gradD, D, baseU,
                    psd_tol: float = PSD_TOL) -> EllipticityReport:
    gradD = np.asarray(gradD, dtype=float).reshape(sys.Nstar, sys.alpha_dim)
    D = np.asarray(D, dtype=float).reshape(sys.Nstar)
    U = dtp_implicit(sys, gradD, D, baseU)
    M = compute_M(sys, gradD, D, U)
    m_min = _sym_min_eig(M)
    if m_min <= 0:
        raise MPDLoss("M lost positive definiteness", m_min)
    Jf = sys.F_jac(U).reshape(sys.Nstar * sys.alpha_dim, sys.N)
    W = np.linalg.solve(M, np.diag(1.0 / sys.a_diag))      # M^{-1} a^{-1}
    A = Jf @ W @ Jf.T
    S = 0.5 * (W + W.T)
    A_sym = Jf @ S @ Jf.T
    A_sym = 0.5 * (A_sym + A_sym.T)
    a_min = _gram_min_eig(Jf, S, A_sym)
    return EllipticityReport(M, m_min, A, A_sym, a_min, a_min >= -psd_tol,
                             (gradD, D, np.asarray(baseU, dtype=float)), U)


def _gram_min_eig(Jf, S, A_sym):
    """Smallest eigenvalue of ``Jf S Jf^T``.

    With ``S = L L^T`` the matrix is the Gram matrix of ``Jf L`` and its
    spectrum is the squared singular values (padded with exact zeros), which
    avoids eigensolver round-off on the null space.
    """
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return float(np.linalg.eigvalsh(A_sym)[0])
    sv = np.linalg.svd(Jf @ L, compute_uv=False)
    if Jf.shape[0] > sv.size:
        return 0.0
    return float(sv[-1] ** 2)


def _uniform_ball(rng, dim, radius):
    if dim == 0 or radius == 0:
        return np.zeros(dim)
    v = rng.standard_normal(dim)
    return radius * rng.uniform() ** (1.0 / dim) * v / np.linalg.norm(v)


def neighborhood_scan(sys: ConservationSourceSystem, baseU, radius: float, samples: int = 100,
                      rng=None, psd_tol: float = PSD_TOL) -> ScanResult:
    """Sample ``(grad D, D)`` uniformly in a product of Frobenius balls.

    ``MPDLoss`` at a sample is recorded on that sample's report rather than
    raised.  Sample order is fixed by ``rng``.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    rng = rng if rng is not None else np.random.default_rng(0)
    count = 1 if radius == 0 else int(samples)
    ga = sys.Nstar * sys.alpha_dim
    reports = []
    for _ in range(count):
        gradD = _uniform_ball(rng, ga, radius).reshape(sys.Nstar, sys.alpha_dim)
        D = _uniform_ball(rng, sys.Nstar, radius)
        try:
            reports.append(acoustic_tensor(sys, gradD, D, baseU, psd_tol))
        except (MPDLoss, MaxIterations) as exc:
            nan = np.full((sys.N, sys.N), np.nan)
            lam = getattr(exc, "min_eig", None)
            reports.append(EllipticityReport(nan, np.nan if lam is None else lam, None, None,
                                             np.nan, False, (gradD, D, np.asarray(baseU)),
                                             None, f"{type(exc).__name__}: {exc}"))
    return ScanResult(reports, all(r.psd_certified for r in reports))


def check_derivatives(sys: ConservationSourceSystem, U, x=None) -> float:
    """Largest relative central-difference error over flux and source Jacobians."""
    U = np.asarray(U, dtype=float)
    h = 1e-6
    worst = 0.0
    for fn, jac in ((lambda V: np.asarray(sys.flux(V)), sys.F_jac),
                    (lambda V: sys.G(V, x), lambda V: sys.G_jac(V, x))):
        J = jac(U)
        fd = np.stack([(fn(U + h * e) - fn(U - h * e)) / (2 * h) for e in np.eye(sys.N)], axis=-1)
        worst = max(worst, float(np.abs(J - fd.reshape(J.shape)).max() / max(np.abs(J).max(), 1.0)))
    return worst


def second_derivative_bound(sys: ConservationSourceSystem, lower, upper, samples=200, rng=None):
    """Sampled max of |d2F| and |d2G| over a box of primal states."""
    rng = rng if rng is not None else np.random.default_rng(0)
    lower, upper = np.asarray(lower, float), np.asarray(upper, float)
    bound = 0.0
    for _ in range(samples):
        U = rng.uniform(lower, upper)
        bound = max(bound, np.abs(sys.F_hess(U)).max(), np.abs(sys.G_hess(U)).max())
    return float(bound)


# -- built-in systems -------------------------------------------------------------------

def _const(shape, fill=0.0):
    return lambda *args: np.full(shape, fill)


def scalar_quadratic(a=1.0, alpha_dim=1):
    """F = U^2/2 in every direction, no source."""
    return ConservationSourceSystem(
        1, 1, alpha_dim,
        flux=lambda U: np.full((1, alpha_dim), 0.5 * U[0] ** 2),
        flux_jac=lambda U: np.full((1, alpha_dim, 1), U[0]),
        flux_hess=_const((1, alpha_dim, 1, 1), 1.0),
        a_diag=a, name="scalar_quadratic")


def transport(c=1.0, a=1.0):
    """u_t + c u_x = 0 in (t, x) coordinates."""
    J = np.array([[[1.0], [c]]])
    return ConservationSourceSystem(
        1, 1, 2, flux=lambda U: J[..., 0] * U[0], flux_jac=lambda U: J,
        flux_hess=_const((1, 2, 1, 1)), a_diag=a, name="transport")


def burgers(a=1.0):
    return ConservationSourceSystem(
        1, 1, 2,
        flux=lambda U: np.array([[U[0], 0.5 * U[0] ** 2]]),
        flux_jac=lambda U: np.array([[[1.0], [U[0]]]]),
        flux_hess=lambda U: np.array([[[[0.0]], [[1.0]]]]),
        a_diag=a, name="burgers")


def heat(a=1.0):
    """First-order heat system, U = (u, q): u_t - q_x = 0, u_x - q = 0."""
    J = np.zeros((2, 2, 2))
    J[0, 0, 0] = 1.0     # time flux of row 1 is u
    J[0, 1, 1] = -1.0    # space flux of row 1 is -q
    J[1, 1, 0] = 1.0     # space flux of row 2 is u
    Gj = np.array([[0.0, 0.0], [0.0, -1.0]])
    return ConservationSourceSystem(
        2, 2, 2, flux=lambda U: np.einsum("gak,k->ga", J, U), flux_jac=lambda U: J,
        flux_hess=_const((2, 2, 2, 2)), a_diag=a,
        source=lambda U, x=None: Gj @ U, source_jac=lambda U, x=None: Gj,
        source_hess=_const((2, 2, 2)), name="heat")


def zero_flux(N=1, Nstar=1, alpha_dim=2, a=1.0):
    return ConservationSourceSystem(
        N, Nstar, alpha_dim, flux=_const((Nstar, alpha_dim)),
        flux_jac=_const((Nstar, alpha_dim, N)), flux_hess=_const((Nstar, alpha_dim, N, N)),
        a_diag=a, name="zero_flux")


def _sym(T, axes):
    """Symmetrize a coefficient tensor over its trailing ``axes`` indices."""
    from itertools import permutations
    lead = T.ndim - axes
    perms = list(permutations(range(lead, T.ndim)))
    return sum(np.transpose(T, tuple(range(lead)) + p) for p in perms) / len(perms)


def random_polynomial_system(rng, N, Nstar, alpha_dim, degree=3, a=1.0, scale=1.0):
    """Random flux and source polynomials of total degree <= ``degree``.

    Coefficient tensors are symmetrized so the analytic Jacobians and Hessians
    are exact derivatives.
    """
    def coeffs(lead):
        c = [scale * rng.standard_normal(lead + (N,) * k) for k in range(degree + 1)]
        return [c[0]] + [_sym(ck, k) for k, ck in enumerate(c) if k > 0]

    fc = coeffs((Nstar, alpha_dim))
    gc = coeffs((Nstar,))

    def val(c, U):
        out = c[0].copy()
        for k in range(1, len(c)):
            t = c[k]
            for _ in range(k):
                t = t @ U
            out = out + t
        return out

    def jac(c, U):
        out = np.zeros(c[0].shape + (N,))
        for k in range(1, len(c)):
            t = c[k]
            for _ in range(k - 1):
                t = t @ U
            out = out + k * t
        return out

    def hess(c, U):
        out = np.zeros(c[0].shape + (N, N))
        for k in range(2, len(c)):
            t = c[k]
            for _ in range(k - 2):
                t = t @ U
            out = out + k * (k - 1) * t
        return out

    return ConservationSourceSystem(
        N, Nstar, alpha_dim,
        flux=lambda U: val(fc, U), flux_jac=lambda U: jac(fc, U),
        flux_hess=lambda U: hess(fc, U), a_diag=a,
        source=lambda U, x=None: val(gc, U), source_jac=lambda U, x=None: jac(gc, U),
        source_hess=lambda U, x=None: hess(gc, U), name="polynomial")


BUILTINS = {
    "scalar_quadratic": scalar_quadratic,
    "transport": transport,
    "burgers": burgers,
    "heat": heat,
    "zero_flux": zero_flux,
}
